//! File formats: the scene document, sequence files, graph exports, orbit
//! and piece exports, flight event tables, and rotation-cloud exports.
//!
//! Scenes and structured reports are JSON; tabular exports (clouds, flight
//! events, estimate series) are whitespace-delimited text with every float
//! printed at 17 significant digits so files reproduce bit-identically.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json;
use thiserror::Error;

use crate::admissible::{IncrementGraph, SymbolicSequence, TransitionGraph};
use crate::flow::Flight;
use crate::rotset::{Provenance, RotationCloud};
use crate::scene::{LatticeObstacleId, Scene, SceneError};
use crate::varpath::{PeriodicOrbit, TrajectoryPiece};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("sequence row {row}: {reason}")]
    BadSequenceRow { row: usize, reason: String },
    #[error("delimited row {row}: {reason}")]
    BadDelimitedRow { row: usize, reason: String },
}

/// 17 significant digits; round-trips any f64 exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parse a scene document: `{"m": ..., "obstacles": [{"center": [...],
/// "radius": ...}], "tolerance": ...}` with the tolerance optional.
pub fn scene_from_json(text: &str) -> Result<Scene, IoError> {
    #[derive(Deserialize)]
    struct SceneDoc {
        m: usize,
        obstacles: Vec<ObstacleDoc>,
        tolerance: Option<f64>,
    }
    #[derive(Deserialize)]
    struct ObstacleDoc {
        center: Vec<f64>,
        radius: f64,
    }
    let doc: SceneDoc = serde_json::from_str(text)?;
    let obstacles = doc
        .obstacles
        .into_iter()
        .map(|o| crate::scene::Obstacle {
            center: o.center,
            radius: o.radius,
        })
        .collect();
    Ok(Scene::new(
        doc.m,
        obstacles,
        doc.tolerance.unwrap_or(crate::scene::DEFAULT_TOLERANCE),
    )?)
}

pub fn scene_to_json(scene: &Scene) -> String {
    serde_json::to_string_pretty(scene).expect("scene serializes")
}

/// Sequence file: a JSON array of `[k_1, ..., k_m, r]` rows with 1-based
/// labels.
pub fn sequence_to_json(seq: &SymbolicSequence) -> String {
    let rows: Vec<Vec<i64>> = seq
        .entries
        .iter()
        .map(|e| {
            let mut row = e.cell.clone();
            row.push(e.label as i64);
            row
        })
        .collect();
    serde_json::to_string(&rows).expect("rows serialize")
}

pub fn sequence_from_json(text: &str, m: usize) -> Result<SymbolicSequence, IoError> {
    let rows: Vec<Vec<i64>> = serde_json::from_str(text)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m + 1 {
            return Err(IoError::BadSequenceRow {
                row: i,
                reason: format!("expected {} numbers, got {}", m + 1, row.len()),
            });
        }
        let label = row[m];
        if label < 1 {
            return Err(IoError::BadSequenceRow {
                row: i,
                reason: format!("label {label} is not positive"),
            });
        }
        entries.push(LatticeObstacleId::new(
            row[..m].to_vec(),
            label as usize,
        ));
    }
    if entries.is_empty() {
        return Err(IoError::BadSequenceRow {
            row: 0,
            reason: "sequence file is empty".into(),
        });
    }
    Ok(SymbolicSequence::new(entries))
}

/// Graph export: vertex and arc arrays, index-based adjacency.
#[derive(Debug, Serialize, Deserialize)]
pub struct IncrementGraphDoc {
    pub j_max: i64,
    /// `[j_1, ..., j_m, s]` rows.
    pub vertices: Vec<Vec<i64>>,
    /// `[from_index, to_index]` pairs.
    pub arcs: Vec<[usize; 2]>,
    pub boundary_shell_warning: bool,
}

pub fn increment_graph_to_json(g: &IncrementGraph) -> String {
    let vertices = g
        .vertices
        .iter()
        .map(|(j, s)| {
            let mut row = j.clone();
            row.push(*s as i64);
            row
        })
        .collect();
    let mut arcs = Vec::new();
    for (from, outs) in g.edges.iter().enumerate() {
        for &to in outs {
            arcs.push([from, to]);
        }
    }
    serde_json::to_string_pretty(&IncrementGraphDoc {
        j_max: g.j_max,
        vertices,
        arcs,
        boundary_shell_warning: g.boundary_shell_warning,
    })
    .expect("graph serializes")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TransitionGraphDoc {
    pub j_max: i64,
    /// `[prev_label, l_1, ..., l_m, label]` rows.
    pub states: Vec<Vec<i64>>,
    pub arcs: Vec<[usize; 2]>,
}

pub fn transition_graph_to_json(g: &TransitionGraph) -> String {
    let states = g
        .states
        .iter()
        .map(|s| {
            let mut row = vec![s.prev_label as i64];
            row.extend(&s.increment);
            row.push(s.label as i64);
            row
        })
        .collect();
    let mut arcs = Vec::new();
    for (from, outs) in g.arcs.iter().enumerate() {
        for &to in outs {
            arcs.push([from, to]);
        }
    }
    serde_json::to_string_pretty(&TransitionGraphDoc {
        j_max: g.j_max,
        states,
        arcs,
    })
    .expect("graph serializes")
}

pub fn increment_graph_doc_from_json(text: &str) -> Result<IncrementGraphDoc, IoError> {
    Ok(serde_json::from_str(text)?)
}

pub fn piece_to_json(piece: &TrajectoryPiece) -> String {
    serde_json::to_string_pretty(piece).expect("piece serializes")
}

pub fn piece_from_json(text: &str) -> Result<TrajectoryPiece, IoError> {
    Ok(serde_json::from_str(text)?)
}

pub fn orbit_to_json(orbit: &PeriodicOrbit) -> String {
    serde_json::to_string_pretty(orbit).expect("orbit serializes")
}

pub fn orbit_from_json(text: &str) -> Result<PeriodicOrbit, IoError> {
    Ok(serde_json::from_str(text)?)
}

/// Flight event table: `time  x_1 .. x_m  k_1 .. k_m  label` per row,
/// preceded by a comment header.
pub fn flight_to_table(flight: &Flight) -> String {
    let m = flight.initial.position.len();
    let mut out = String::new();
    let _ = writeln!(out, "# time  point[{m}]  cell[{m}]  label");
    for ev in &flight.events {
        let mut row = fmt17(ev.time);
        for x in &ev.point {
            row.push(' ');
            row.push_str(&fmt17(*x));
        }
        for k in &ev.id.cell {
            let _ = write!(row, " {k}");
        }
        let _ = write!(row, " {}", ev.id.label);
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Parse the flight event table back into (time, point, cell, label) rows.
pub fn flight_table_rows(
    text: &str,
    m: usize,
) -> Result<Vec<(f64, Vec<f64>, Vec<i64>, usize)>, IoError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 1 + 2 * m + 1 {
            return Err(IoError::BadDelimitedRow {
                row: i,
                reason: format!("expected {} fields, got {}", 2 + 2 * m, fields.len()),
            });
        }
        let parse_f = |s: &str, row: usize| -> Result<f64, IoError> {
            s.parse().map_err(|e| IoError::BadDelimitedRow {
                row,
                reason: format!("bad float {s:?}: {e}"),
            })
        };
        let time = parse_f(fields[0], i)?;
        let point = fields[1..1 + m]
            .iter()
            .map(|s| parse_f(s, i))
            .collect::<Result<Vec<_>, _>>()?;
        let cell = fields[1 + m..1 + 2 * m]
            .iter()
            .map(|s| {
                s.parse::<i64>().map_err(|e| IoError::BadDelimitedRow {
                    row: i,
                    reason: format!("bad integer {s:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let label = fields[1 + 2 * m]
            .parse::<usize>()
            .map_err(|e| IoError::BadDelimitedRow {
                row: i,
                reason: format!("bad label: {e}"),
            })?;
        rows.push((time, point, cell, label));
    }
    Ok(rows)
}

/// Rotation estimate series: `n  v_1 .. v_m` rows.
pub fn estimate_series_to_table(series: &[(usize, Vec<f64>)]) -> String {
    let mut out = String::from("# n  estimate\n");
    for (n, v) in series {
        let mut row = n.to_string();
        for x in v {
            row.push(' ');
            row.push_str(&fmt17(*x));
        }
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Cloud export: `v_1 .. v_m  norm  provenance  source` rows, gnuplot-ready.
pub fn cloud_to_table(cloud: &RotationCloud) -> String {
    let mut out = String::from("# vector  norm  provenance  source\n");
    for s in &cloud.samples {
        let mut row = String::new();
        for x in &s.vector {
            row.push_str(&fmt17(*x));
            row.push(' ');
        }
        row.push_str(&fmt17(s.norm));
        let tag = match s.provenance {
            Provenance::Periodic => "periodic",
            Provenance::AdmissiblePiece => "admissible-piece",
            Provenance::Flow => "flow",
        };
        let _ = write!(row, " {tag} \"{}\"", s.source.replace('"', "'"));
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Parse the numeric prefix of cloud rows back: `(vector, norm)` pairs.
pub fn cloud_table_rows(text: &str, m: usize) -> Result<Vec<(Vec<f64>, f64)>, IoError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < m + 1 {
            return Err(IoError::BadDelimitedRow {
                row: i,
                reason: format!("expected at least {} fields", m + 1),
            });
        }
        let mut v = Vec::with_capacity(m);
        for f in &fields[..m] {
            v.push(f.parse::<f64>().map_err(|e| IoError::BadDelimitedRow {
                row: i,
                reason: format!("bad float {f:?}: {e}"),
            })?);
        }
        let norm = fields[m].parse::<f64>().map_err(|e| IoError::BadDelimitedRow {
            row: i,
            reason: format!("bad norm: {e}"),
        })?;
        rows.push((v, norm));
    }
    Ok(rows)
}

/// Hull export for the plane: ordered vertex coordinates, one per row.
pub fn hull_2d_to_table(cloud: &RotationCloud) -> Option<String> {
    let hull = cloud.hull_2d.as_ref()?;
    let mut out = String::from("# hull vertices in order\n");
    for &i in hull {
        let v = &cloud.samples[i].vector;
        let _ = writeln!(out, "{} {}", fmt17(v[0]), fmt17(v[1]));
    }
    // Close the polygon for plotting.
    if let Some(&first) = hull.first() {
        let v = &cloud.samples[first].vector;
        let _ = writeln!(out, "{} {}", fmt17(v[0]), fmt17(v[1]));
    }
    Some(out)
}

/// Hull export for three dimensions: facet index triples.
pub fn hull_3d_to_table(cloud: &RotationCloud) -> Option<String> {
    let facets = cloud.hull_3d.as_ref()?;
    let mut out = String::from("# hull facets as sample indices\n");
    for f in facets {
        let _ = writeln!(out, "{} {} {}", f[0], f[1], f[2]);
    }
    Some(out)
}
