//! Rotation vectors and finite realizations of the rotation-set theorems:
//! sampling the admissible rotation set by periodic orbits, the convexity
//! experiment via block concatenation with its explicit error budget, a
//! density probe, and the proper-inclusion certificate against the free
//! flight.
//!
//! The admissible rotation set itself is never represented exactly; it is
//! always a finite sample cloud plus its convex hull, which is the natural
//! approximant because the set is convex and periodic rotation vectors are
//! dense in it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admissible::{
    build_transition_graph, concat_blocks, enumerate_periodic, find_block_connector,
    ConcatError, ConnectorError, PeriodicType,
};
use crate::flow::{far_flight_example, FarFlight, FlowError};
use crate::hull;
use crate::linalg::{self, lattice};
use crate::scene::Scene;
use crate::varpath::{minimize_open, minimize_periodic, Endpoints, TrajectoryPiece, VarError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Periodic,
    AdmissiblePiece,
    Flow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationSample {
    pub vector: Vec<f64>,
    pub norm: f64,
    pub provenance: Provenance,
    /// Identifier of the producing object (cycle entries, flight, ...).
    pub source: String,
}

#[derive(Debug, Error)]
pub enum RotsetError {
    #[error(transparent)]
    Var(#[from] VarError),
    #[error(transparent)]
    Connector(#[from] ConnectorError),
    #[error(transparent)]
    Concat(#[from] ConcatError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("block sizing failed: |T| = {achieved} below the required {required} after {reps} repetitions")]
    BudgetInfeasible {
        achieved: f64,
        required: f64,
        reps: usize,
    },
    #[error("no periodic samples were produced (all cycles failed minimization)")]
    EmptyCloud,
}

/// Rotation vector of an accepted periodic orbit: the lattice period over the
/// period length, with periodic provenance.
pub fn rotation_vector_periodic(orbit: &crate::varpath::PeriodicOrbit) -> RotationSample {
    let vector = orbit.rotation_vector.clone();
    RotationSample {
        norm: linalg::norm(&vector),
        source: format!("cycle {:?} p {:?}", orbit.ptype.cycle.entries, orbit.period_cells),
        vector,
        provenance: Provenance::Periodic,
    }
}

/// Options controlling enumeration scale.
#[derive(Debug, Clone)]
pub struct SampleOptions {
    /// Cell cutoff for the transition graph backing the enumeration.
    pub j_max: i64,
    /// Optional cap on the number of cycles enumerated.
    pub max_cycles: Option<usize>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            j_max: 1,
            max_cycles: Some(500_000),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationCloud {
    pub samples: Vec<RotationSample>,
    /// Hull vertex indices in order (torus dimension 2 only).
    pub hull_2d: Option<Vec<usize>>,
    /// Hull facets as index triples (torus dimension 3 only).
    pub hull_3d: Option<Vec<[usize; 3]>>,
    /// `1 - max norm` over the samples.
    pub delta_margin: f64,
    pub cycles_enumerated: usize,
    /// Cycles whose minimization was rejected (grazing, stagnation).
    pub cycles_skipped: usize,
    /// Enumeration hit its cycle cap.
    pub truncated: bool,
    /// Some cycle uses an increment on the cell cutoff shell, so the cloud
    /// may be missing longer-stride samples.
    pub cutoff_shell_warning: bool,
}

/// Enumerate periodic cycles up to the discrete period bound, minimize each,
/// and collect the rotation samples with their hull.
pub fn sample_admissible_rotation_set(
    scene: &Scene,
    q_max: usize,
    opts: &SampleOptions,
) -> Result<RotationCloud, RotsetError> {
    let graph = build_transition_graph(scene, opts.j_max);
    let (cycles, truncated) = enumerate_periodic(scene, &graph, q_max, opts.max_cycles);
    let mut samples = Vec::new();
    let mut skipped = 0usize;
    let mut cutoff_shell_warning = false;
    for cycle in &cycles {
        if cycle
            .ptype
            .increment_word()
            .iter()
            .any(|(l, _)| lattice::linf(l) == opts.j_max)
        {
            cutoff_shell_warning = true;
        }
        match minimize_periodic(scene, &cycle.ptype) {
            Ok(orbit) => samples.push(rotation_vector_periodic(&orbit)),
            Err(_) => skipped += 1,
        }
    }
    if samples.is_empty() {
        return Err(RotsetError::EmptyCloud);
    }
    let points: Vec<Vec<f64>> = samples.iter().map(|s| s.vector.clone()).collect();
    let hull_2d = (scene.m == 2).then(|| hull::convex_hull_2d(&points));
    let hull_3d = if scene.m == 3 {
        hull::convex_hull_3d(&points)
    } else {
        None
    };
    let delta_margin = 1.0 - samples.iter().map(|s| s.norm).fold(0.0, f64::max);
    Ok(RotationCloud {
        samples,
        hull_2d,
        hull_3d,
        delta_margin,
        cycles_enumerated: cycles.len(),
        cycles_skipped: skipped,
        truncated,
        cutoff_shell_warning,
    })
}

/// Support values of the cloud along requested directions (any dimension).
pub fn cloud_support(cloud: &RotationCloud, directions: &[Vec<f64>]) -> Vec<f64> {
    let points: Vec<Vec<f64>> = cloud.samples.iter().map(|s| s.vector.clone()).collect();
    directions
        .iter()
        .map(|d| hull::support_value(&points, d))
        .collect()
}

/// Everything the convexity experiment measured, with the assembled budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Requested weight.
    pub t: f64,
    /// Realized length-weighted rational weight.
    pub s: f64,
    /// Rational block ratio p/q.
    pub x: f64,
    pub p_blocks: usize,
    pub q_blocks: usize,
    /// Periods per A-block and B-block.
    pub reps_a: usize,
    pub reps_b: usize,
    pub block_length_t: f64,
    pub block_length_s: f64,
    pub combined_entries: usize,
    pub combined_length: f64,
    pub target: Vec<f64>,
    pub achieved_vector: Vec<f64>,
    pub achieved_error: f64,
    /// Assembled budget: the block-mixing term plus the block rotation
    /// deviations plus the weight rounding.
    pub budget: f64,
    pub budget_mixing: f64,
    pub budget_block_t: f64,
    pub budget_block_s: f64,
    pub budget_rounding: f64,
    pub eps: f64,
    pub pass: bool,
}

/// Realize a convex combination of two periodic rotation vectors by one long
/// admissible piece: repeat each cycle until its piece length exceeds
/// `3 (16 d + 20) / eps`, approximate the weight by a rational block ratio,
/// join blocks by hub connectors, and minimize the concatenated type.
pub fn convexity_experiment(
    scene: &Scene,
    a: &PeriodicType,
    b: &PeriodicType,
    t: f64,
    eps: f64,
) -> Result<ConvexityReport, RotsetError> {
    assert!(t > 0.0 && t < 1.0, "weight must be interior");
    assert!(eps > 0.0);
    let d = scene.max_diameter();
    let lambda = 3.0 * (16.0 * d + 20.0) / eps;

    let orbit_a = minimize_periodic(scene, a)?;
    let orbit_b = minimize_periodic(scene, b)?;
    let u = orbit_a.rotation_vector.clone();
    let v = orbit_b.rotation_vector.clone();

    // Size each block so its free-endpoint piece is at least lambda long;
    // piece and orbit lengths differ by at most 2 d per the length-spread
    // bound, so one extra period absorbs the slack.
    let size_block = |orbit_len: f64, ptype: &PeriodicType| -> Result<(usize, PeriodicType, TrajectoryPiece), RotsetError> {
        let mut reps = ((lambda + 2.0 * d) / orbit_len).ceil() as usize + 1;
        for _ in 0..4 {
            let block = ptype.repeated(reps);
            let piece = minimize_open(scene, &block.cycle, Endpoints::Free)?;
            if piece.length >= lambda {
                return Ok((reps, block, piece));
            }
            reps *= 2;
        }
        Err(RotsetError::BudgetInfeasible {
            achieved: 0.0,
            required: lambda,
            reps,
        })
    };
    let (reps_a, block_a, piece_t) = size_block(orbit_a.period_length, a)?;
    let (reps_b, block_b, piece_s) = size_block(orbit_b.period_length, b)?;
    let len_t = piece_t.length;
    let len_s = piece_s.length;
    let rot_t = linalg::scale(&piece_t.displacement, 1.0 / len_t);
    let rot_s = linalg::scale(&piece_s.displacement, 1.0 / len_s);
    let dev_t = linalg::dist(&rot_t, &u);
    let dev_s = linalg::dist(&rot_s, &v);

    // Rational weight: s = f(x) with f(x) = x|T| / (x|T| + (1-x)|S|), so the
    // target block ratio solves f(x*) = t. The smallest denominator meeting
    // the rounding budget eps / (6 max(|u|, |v|)) wins; with both rotation
    // vectors zero any ratio works and one block of each is used.
    let x_star = t * len_s / ((1.0 - t) * len_t + t * len_s);
    let k_norm = linalg::norm(&u).max(linalg::norm(&v));
    let tol_s = if k_norm > 0.0 {
        eps / (6.0 * k_norm)
    } else {
        f64::INFINITY
    };
    let f = |x: f64| x * len_t / (x * len_t + (1.0 - x) * len_s);
    let mut chosen: Option<(usize, usize, f64)> = None;
    for q in 2..=4096usize {
        let p = ((x_star * q as f64).round() as usize).clamp(1, q - 1);
        let s = f(p as f64 / q as f64);
        if (t - s).abs() <= tol_s {
            chosen = Some((p, q, s));
            break;
        }
    }
    let (p_blocks, q_blocks, s) = chosen.ok_or(RotsetError::BudgetInfeasible {
        achieved: 0.0,
        required: tol_s,
        reps: 4096,
    })?;
    let x = p_blocks as f64 / q_blocks as f64;

    let c1 = find_block_connector(scene, &block_a, &block_a)?;
    let c2 = find_block_connector(scene, &block_a, &block_b)?;
    let c3 = find_block_connector(scene, &block_b, &block_b)?;
    let combined = concat_blocks(
        scene,
        &block_a,
        &block_b,
        p_blocks,
        q_blocks - p_blocks,
        &c1,
        &c2,
        &c3,
    )?;
    let q_piece = minimize_open(scene, &combined, Endpoints::Free)?;
    let achieved_vector = linalg::scale(&q_piece.displacement, 1.0 / q_piece.length);
    let target = linalg::axpy(&linalg::scale(&u, t), 1.0 - t, &v);
    let achieved_error = linalg::dist(&achieved_vector, &target);

    // Budget assembled from the proof's chain of bounds.
    let budget_mixing = (8.0 * d + 10.0) / (x * len_t + (1.0 - x) * len_s);
    let budget_block_t = s * dev_t;
    let budget_block_s = (1.0 - s) * dev_s;
    let budget_rounding = 2.0 * (s - t).abs() * k_norm;
    let budget = budget_mixing + budget_block_t + budget_block_s + budget_rounding;

    Ok(ConvexityReport {
        u,
        v,
        t,
        s,
        x,
        p_blocks,
        q_blocks,
        reps_a,
        reps_b,
        block_length_t: len_t,
        block_length_s: len_s,
        combined_entries: combined.len(),
        combined_length: q_piece.length,
        target,
        achieved_vector,
        achieved_error,
        budget,
        budget_mixing,
        budget_block_t,
        budget_block_s,
        budget_rounding,
        eps,
        pass: achieved_error <= eps && achieved_error <= budget,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub piece_rotation: Vec<f64>,
    pub piece_segments: usize,
    pub nearest_distance: f64,
    pub nearest_sample: Option<RotationSample>,
    pub sample_count: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// Minimum piece size for a meaningful density probe.
pub const DENSITY_MIN_SEGMENTS: usize = 100;

/// Distance from a long admissible piece's rotation estimate to the nearest
/// periodic sample of the cloud. The piece must carry at least
/// [`DENSITY_MIN_SEGMENTS`] entries; short pieces say nothing about limits.
pub fn density_probe(
    scene: &Scene,
    piece: &TrajectoryPiece,
    q_max: usize,
    threshold: f64,
    opts: &SampleOptions,
) -> Result<DensityReport, RotsetError> {
    assert!(
        piece.sequence.len() >= DENSITY_MIN_SEGMENTS,
        "density probe needs a piece of at least {DENSITY_MIN_SEGMENTS} segments, got {}",
        piece.sequence.len()
    );
    let cloud = sample_admissible_rotation_set(scene, q_max, opts)?;
    Ok(density_probe_against(piece, &cloud.samples, threshold))
}

/// [`density_probe`] against an existing sample cloud.
pub fn density_probe_against(
    piece: &TrajectoryPiece,
    samples: &[RotationSample],
    threshold: f64,
) -> DensityReport {
    let rho = linalg::scale(&piece.displacement, 1.0 / piece.length);
    let mut nearest_distance = f64::INFINITY;
    let mut nearest_sample = None;
    for s in samples {
        let dist = linalg::dist(&rho, &s.vector);
        if dist < nearest_distance {
            nearest_distance = dist;
            nearest_sample = Some(s.clone());
        }
    }
    DensityReport {
        piece_rotation: rho,
        piece_segments: piece.sequence.len(),
        nearest_distance,
        nearest_sample,
        sample_count: samples.len(),
        threshold,
        pass: nearest_distance <= threshold,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InclusionReport {
    /// `1 - max periodic-sample norm`, strictly positive for finite clouds.
    pub delta: f64,
    pub max_periodic_norm: f64,
    pub periodic_samples: usize,
    pub flow: FarFlight,
    pub flow_norm: f64,
    pub pass: bool,
}

/// Desk-scale certificate that the admissible rotation set is properly
/// contained in the general rotation set: every periodic sample keeps a
/// positive margin to the unit sphere, while the free-flight sample exceeds
/// that margin.
pub fn proper_inclusion_check(
    scene: &Scene,
    q_max: usize,
    k: i64,
    opts: &SampleOptions,
) -> Result<InclusionReport, RotsetError> {
    let cloud = sample_admissible_rotation_set(scene, q_max, opts)?;
    let max_periodic_norm = cloud.samples.iter().map(|s| s.norm).fold(0.0, f64::max);
    let delta = 1.0 - max_periodic_norm;
    let flow = far_flight_example(scene, k)?;
    let flow_norm = linalg::norm(&flow.ratio);
    let pass = delta > 0.0 && flow_norm > 1.0 - delta;
    Ok(InclusionReport {
        delta,
        max_periodic_norm,
        periodic_samples: cloud.samples.len(),
        flow,
        flow_norm,
        pass,
    })
}
