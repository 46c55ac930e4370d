//! Exact billiard flow in the universal cover.
//!
//! Unit-speed rays are traced against the obstacle lattice by incremental
//! cell traversal; reflections are specular. Tangential hits are rejected
//! rather than resolved (they are measure zero and make itineraries
//! ill-defined), and rays that cross the cell cutoff without hitting anything
//! terminate with an escape verdict, which is how infinite-horizon corridors
//! show up in practice.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admissible::SymbolicSequence;
use crate::linalg::{self, lattice};
use crate::raycast;
use crate::scene::{LatticeObstacleId, Scene};
use crate::varpath::TrajectoryPiece;

/// Impact parameters within this distance of the radius are tangential.
pub const TANGENCY_TOLERANCE: f64 = 1e-10;
/// Default cell cutoff before a ray is declared escaped.
pub const FLOW_CUTOFF_CELLS: i64 = 1_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowState {
    pub position: Vec<f64>,
    /// Unit direction.
    pub direction: Vec<f64>,
    /// Accumulated arc length (unit speed).
    pub time: f64,
}

impl FlowState {
    pub fn new(position: Vec<f64>, direction: Vec<f64>) -> Self {
        let direction = linalg::normalized(&direction).expect("direction must be nonzero");
        Self {
            position,
            direction,
            time: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReflectionEvent {
    pub time: f64,
    pub point: Vec<f64>,
    pub id: LatticeObstacleId,
}

/// Why a flight stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    MaxReflections,
    MaxTime,
    Tangency,
    /// The ray travelled the cell cutoff without hitting an obstacle.
    Escape,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Flight {
    pub initial: FlowState,
    pub events: Vec<ReflectionEvent>,
    pub final_state: FlowState,
    pub terminal: Terminal,
}

impl Flight {
    pub fn displacement(&self) -> Vec<f64> {
        linalg::sub(&self.final_state.position, &self.initial.position)
    }
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("tangential hit on {id:?} (impact parameter within {TANGENCY_TOLERANCE:e} of the radius)")]
    Tangency { id: LatticeObstacleId },
    #[error("event index {n} out of range 1..={len}")]
    EventOutOfRange { n: usize, len: usize },
    #[error("far-flight construction found no clearing offset up to {cap}")]
    NoClearingOffset { cap: i64 },
}

/// Outcome of one step of the flow.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Reflected {
        state: FlowState,
        event: ReflectionEvent,
    },
    /// No hit within the cell cutoff.
    Escaped,
}

/// Advance to the next reflection: find the first lattice-ball intersection
/// and reflect the direction in the sphere normal.
pub fn step(scene: &Scene, state: &FlowState, cutoff_cells: i64) -> Result<StepOutcome, FlowError> {
    let hit = match raycast::first_hit(scene, &state.position, &state.direction, cutoff_cells, None)
    {
        Some(h) => h,
        None => return Ok(StepOutcome::Escaped),
    };
    let ball = scene.ball(&hit.id);
    if ball.radius - hit.impact_parameter < TANGENCY_TOLERANCE {
        return Err(FlowError::Tangency { id: hit.id });
    }
    let normal = linalg::scale(&linalg::sub(&hit.point, &ball.center), 1.0 / ball.radius);
    let direction = linalg::reflect(&state.direction, &normal);
    // Reflection is an isometry; renormalize to keep long flights exactly
    // unit speed.
    let direction = linalg::normalized(&direction).expect("reflected direction nonzero");
    let event = ReflectionEvent {
        time: state.time + hit.t,
        point: hit.point.clone(),
        id: hit.id,
    };
    Ok(StepOutcome::Reflected {
        state: FlowState {
            position: hit.point,
            direction,
            time: event.time,
        },
        event,
    })
}

/// Trace a flight until `n_max` reflections, time `t_max`, a tangency, or an
/// escape. All events are recorded; the terminal condition is part of the
/// flight.
pub fn trace(scene: &Scene, start: FlowState, n_max: usize, t_max: f64) -> Flight {
    let initial = start.clone();
    let mut state = start;
    let mut events = Vec::new();
    let terminal = loop {
        if events.len() >= n_max {
            break Terminal::MaxReflections;
        }
        match step(scene, &state, FLOW_CUTOFF_CELLS) {
            Err(FlowError::Tangency { .. }) => break Terminal::Tangency,
            Err(_) => unreachable!("step only fails with tangency"),
            Ok(StepOutcome::Escaped) => break Terminal::Escape,
            Ok(StepOutcome::Reflected { state: next, event }) => {
                if event.time > t_max {
                    // Stop exactly at the time budget, mid-segment.
                    let remain = t_max - state.time;
                    state = FlowState {
                        position: linalg::axpy(&state.position, remain, &state.direction),
                        direction: state.direction.clone(),
                        time: t_max,
                    };
                    break Terminal::MaxTime;
                }
                events.push(event);
                state = next;
            }
        }
    };
    Flight {
        initial,
        events,
        final_state: state,
        terminal,
    }
}

/// Displacement-over-time ratio at the `n`-th reflection (1-based).
pub fn rotation_estimate(flight: &Flight, n: usize) -> Result<Vec<f64>, FlowError> {
    if n == 0 || n > flight.events.len() {
        return Err(FlowError::EventOutOfRange {
            n,
            len: flight.events.len(),
        });
    }
    let ev = &flight.events[n - 1];
    Ok(linalg::scale(
        &linalg::sub(&ev.point, &flight.initial.position),
        1.0 / ev.time,
    ))
}

/// Free-flight rotation sample: the segment from the lowest boundary point of
/// the lowest obstacle in cell zero to the highest boundary point of the
/// highest obstacle in the cell `(k, -1, 0, ..., 0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FarFlight {
    pub k_requested: i64,
    /// Smallest offset at or above the request whose segment clears.
    pub k_used: i64,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub from_label: usize,
    pub to_label: usize,
    pub displacement: Vec<f64>,
    pub length: f64,
    /// `displacement / length`; unit norm for a straight segment.
    pub ratio: Vec<f64>,
    pub min_clearance: f64,
}

/// Build the far-flight segment, increasing `k` until the open segment clears
/// every non-incident obstacle, and report the ratio achieved.
pub fn far_flight_example(scene: &Scene, k: i64) -> Result<FarFlight, FlowError> {
    assert!(k >= 1);
    let m = scene.m;
    let down_axis = 1; // the axis that drops by one cell
    let advance_axis = 0;

    // Lowest obstacle: minimal reach along the down axis; ties resolved by
    // label order.
    let from_label = scene
        .labels()
        .min_by(|&a, &b| {
            let fa = scene.obstacle(a).center[down_axis] - scene.obstacle(a).radius;
            let fb = scene.obstacle(b).center[down_axis] - scene.obstacle(b).radius;
            fa.partial_cmp(&fb).unwrap()
        })
        .unwrap();
    let to_label = scene
        .labels()
        .max_by(|&a, &b| {
            let fa = scene.obstacle(a).center[down_axis] + scene.obstacle(a).radius;
            let fb = scene.obstacle(b).center[down_axis] + scene.obstacle(b).radius;
            fa.partial_cmp(&fb).unwrap()
        })
        .unwrap();

    let from_ob = scene.obstacle(from_label);
    let mut from = from_ob.center.clone();
    from[down_axis] -= from_ob.radius;

    let cap = k + 1_000;
    let mut k_used = k;
    loop {
        let to_ob = scene.obstacle(to_label);
        let mut cell = vec![0i64; m];
        cell[advance_axis] = k_used;
        cell[down_axis] = -1;
        let mut to = linalg::add(&to_ob.center, &lattice::to_f64(&cell));
        to[down_axis] += to_ob.radius;

        let from_id = LatticeObstacleId::new(vec![0; m], from_label);
        let to_id = LatticeObstacleId::new(cell, to_label);
        if let Some(clearance) = segment_clearance(scene, &from, &to, &[&from_id, &to_id]) {
            let displacement = linalg::sub(&to, &from);
            let length = linalg::norm(&displacement);
            return Ok(FarFlight {
                k_requested: k,
                k_used,
                ratio: linalg::scale(&displacement, 1.0 / length),
                from,
                to,
                from_label,
                to_label,
                displacement,
                length,
                min_clearance: clearance,
            });
        }
        k_used += 1;
        if k_used > cap {
            return Err(FlowError::NoClearingOffset { cap });
        }
    }
}

/// Minimal clearance of the open segment from every obstacle not in
/// `incident`; `None` when some non-incident obstacle intersects it or an
/// incident one is crossed in the interior.
fn segment_clearance(
    scene: &Scene,
    p: &[f64],
    q: &[f64],
    incident: &[&LatticeObstacleId],
) -> Option<f64> {
    let mut min_clearance = f64::INFINITY;
    for label in scene.labels() {
        let ob = scene.obstacle(label);
        let mut lo = Vec::with_capacity(scene.m);
        let mut hi = Vec::with_capacity(scene.m);
        for i in 0..scene.m {
            lo.push((p[i].min(q[i]) - ob.radius - ob.center[i] - 1e-9).ceil() as i64 - 1);
            hi.push((p[i].max(q[i]) + ob.radius - ob.center[i] + 1e-9).floor() as i64 + 1);
        }
        for cell in lattice::box_points(&lo, &hi) {
            let cand = LatticeObstacleId::new(cell, label);
            let ball = scene.ball(&cand);
            let (dist, t) = linalg::point_segment_distance(&ball.center, p, q);
            if incident.iter().any(|i| scene.same_ball(i, &cand)) {
                if t > 1e-9 && t < 1.0 - 1e-9 && dist < ball.radius - 1e-9 {
                    return None;
                }
                continue;
            }
            let clearance = dist - ball.radius;
            if clearance <= 0.0 {
                return None;
            }
            min_clearance = min_clearance.min(clearance);
        }
    }
    Some(min_clearance)
}

/// View a flight with at least two reflections as a trajectory piece of the
/// type its events spell, rebased so the first event's cell is zero. The
/// initial and final positions become the anchors.
pub fn piece_from_flight(scene: &Scene, flight: &Flight) -> Option<TrajectoryPiece> {
    if flight.events.len() < 2 {
        return None;
    }
    let cell_of = |ev: &ReflectionEvent| ev.id.cell.clone();
    let base = cell_of(&flight.events[0]);
    let shift = lattice::to_f64(&lattice::neg(&base));
    let entries: Vec<LatticeObstacleId> = flight
        .events
        .iter()
        .map(|ev| LatticeObstacleId::new(lattice::sub(&ev.id.cell, &base), ev.id.label))
        .collect();
    let points: Vec<Vec<f64>> = flight
        .events
        .iter()
        .map(|ev| linalg::add(&ev.point, &shift))
        .collect();
    debug_assert!(entries.iter().zip(&points).all(|(e, p)| {
        let ball = scene.ball(e);
        (linalg::dist(p, &ball.center) - ball.radius).abs() < 1e-9
    }));
    let length: f64 = flight.final_state.time - flight.events[0].time;
    let displacement = linalg::sub(&points[points.len() - 1], &points[0]);
    Some(TrajectoryPiece {
        sequence: SymbolicSequence::new(entries),
        length,
        displacement,
        residual: 0.0,
        min_clearance: f64::NAN,
        sweeps: 0,
        lengths_by_sweep: Vec::new(),
        start_anchor: None,
        end_anchor: None,
        points,
    })
}
