//! Trajectory pieces and periodic orbits of a prescribed admissible type,
//! found by minimizing the broken-path length over the product of the typed
//! obstacles' boundary spheres.
//!
//! The minimizer is cyclic coordinate relaxation: each reflection point is
//! updated by solving the classical one-bounce problem for its two fixed
//! neighbors, a one-dimensional unimodal minimization in the plane spanned by
//! the neighbor directions. Dispersing geometry contracts strongly, so a
//! handful of sweeps reaches reflection defects near machine precision; a
//! simultaneous Gauss-Newton polish runs afterwards on small systems. The
//! length trace is recorded per sweep and is non-increasing by construction.
//!
//! Accepted pieces satisfy, and are checked for: points on their spheres,
//! reflection law at every interior point, no grazing reflections, and
//! strictly positive clearance of every open segment from every non-incident
//! obstacle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admissible::{check_admissible, PeriodicType, SymbolicSequence, Violation};
use crate::linalg::{self, lattice};
use crate::scene::{Ball, LatticeObstacleId, Scene};

/// Reflection defect below which a piece is accepted.
pub const REFLECTION_TOLERANCE: f64 = 1e-10;
/// Impact parameters within this distance of the radius are grazing.
pub const GRAZING_TOLERANCE: f64 = 1e-8;
/// Hard cap on relaxation sweeps.
pub const MAX_SWEEPS: usize = 10_000;

/// Endpoint treatment for open pieces.
#[derive(Debug, Clone)]
pub enum Endpoints {
    /// Fixed points in free space; every typed point reflects.
    Anchors { start: Vec<f64>, end: Vec<f64> },
    /// First and last typed points pinned to given boundary points.
    Boundary { start: Vec<f64>, end: Vec<f64> },
    /// First and last typed points free on their spheres.
    Free,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryPiece {
    pub sequence: SymbolicSequence,
    /// Typed reflection points, one per sequence entry, on their spheres.
    pub points: Vec<Vec<f64>>,
    pub start_anchor: Option<Vec<f64>>,
    pub end_anchor: Option<Vec<f64>>,
    /// Full polyline length including anchor segments.
    pub length: f64,
    /// Displacement between the first and last typed points.
    pub displacement: Vec<f64>,
    /// Maximal reflection defect over interior points, radians.
    pub residual: f64,
    /// Minimal distance of any open segment to any non-incident obstacle.
    pub min_clearance: f64,
    pub sweeps: usize,
    /// Polyline length after each sweep; non-increasing.
    pub lengths_by_sweep: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub ptype: PeriodicType,
    pub q: usize,
    pub period_cells: Vec<i64>,
    /// One period of reflection points; the orbit continues at
    /// `points[0] + period_cells`.
    pub points: Vec<Vec<f64>>,
    pub period_length: f64,
    /// Exactly `period_cells / period_length`.
    pub rotation_vector: Vec<f64>,
    pub residual: f64,
    pub min_clearance: f64,
    pub sweeps: usize,
}

#[derive(Debug, Error)]
pub enum VarError {
    #[error("sequence is not admissible: {0:?}")]
    NotAdmissible(Violation),
    #[error("endpoint {which}: {reason}")]
    BadEndpoint { which: &'static str, reason: String },
    #[error("optimizer stagnated after {sweeps} sweeps with residual {residual:e}")]
    Stagnation { sweeps: usize, residual: f64 },
    #[error("segment {segment} penetrates obstacle {obstacle:?} by {depth:e}")]
    Clearance {
        segment: usize,
        obstacle: LatticeObstacleId,
        depth: f64,
    },
    #[error("degenerate grazing reflection at point {index} (impact parameter within {GRAZING_TOLERANCE:e} of the radius)")]
    Grazing { index: usize },
}

/// One node of the optimization chain.
#[derive(Debug, Clone)]
enum Node {
    Fixed(Vec<f64>),
    Sphere { ball: Ball, point: Vec<f64> },
}

impl Node {
    fn position(&self) -> &[f64] {
        match self {
            Node::Fixed(p) => p,
            Node::Sphere { point, .. } => point,
        }
    }
}

/// The one-bounce subproblem: minimize |x - a| + |x - b| over the sphere.
/// Solved in the plane spanned by the directions to `a` and `b`: golden
/// section over the arc between them, then safeguarded Newton on the
/// stationarity equation.
fn bounce_point(ball: &Ball, a: &[f64], b: &[f64]) -> Vec<f64> {
    let c = &ball.center;
    let rho = ball.radius;
    let wa = linalg::sub(a, c);
    let wb = linalg::sub(b, c);
    let ra = linalg::norm(&wa);
    let rb = linalg::norm(&wb);
    if ra < 1e-14 || rb < 1e-14 {
        // Neighbor at the center: ill-posed, keep any boundary point.
        let mut e = vec![0.0; c.len()];
        e[0] = 1.0;
        return linalg::axpy(c, rho, &e);
    }
    let e1 = linalg::scale(&wa, 1.0 / ra);
    let wb_par = linalg::dot(&wb, &e1);
    let wb_perp = linalg::axpy(&wb, -wb_par, &e1);
    let perp_norm = linalg::norm(&wb_perp);

    let (e2, phi) = if perp_norm > 1e-12 * rb {
        (
            linalg::scale(&wb_perp, 1.0 / perp_norm),
            perp_norm.atan2(wb_par),
        )
    } else {
        // Collinear neighbors: head-on bounce for the same side, an arbitrary
        // perpendicular plane otherwise (the clearance check rejects paths
        // through the ball).
        if wb_par > 0.0 {
            return linalg::axpy(c, rho, &e1);
        }
        let mut e2 = vec![0.0; c.len()];
        let k = (0..c.len())
            .min_by(|&i, &j| e1[i].abs().partial_cmp(&e1[j].abs()).unwrap())
            .unwrap();
        e2[k] = 1.0;
        let proj = linalg::dot(&e2, &e1);
        let e2 = linalg::axpy(&e2, -proj, &e1);
        let e2 = linalg::normalized(&e2).unwrap();
        (e2, std::f64::consts::PI)
    };

    // Distances to a and b from the arc point at angle theta.
    let da = |th: f64| (ra * ra + rho * rho - 2.0 * ra * rho * th.cos()).sqrt();
    let db = |th: f64| (rb * rb + rho * rho - 2.0 * rb * rho * (phi - th).cos()).sqrt();
    let f = |th: f64| da(th) + db(th);

    // Golden section localizes the minimum; a derivative-free bracket cannot
    // resolve theta below sqrt(eps), so Newton on the stationarity equation
    // f'(theta) = rho (ra sin th / da - rb sin(phi - th) / db) finishes the
    // job at full precision.
    let inv_phi_golden = 0.618_033_988_749_894_9_f64;
    let (mut lo, mut hi) = (0.0_f64, phi);
    let mut x1 = hi - inv_phi_golden * (hi - lo);
    let mut x2 = lo + inv_phi_golden * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..40 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi_golden * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi_golden * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut th = 0.5 * (lo + hi);
    for _ in 0..12 {
        let (va, vb) = (da(th), db(th));
        let g = ra * th.sin() / va - rb * (phi - th).sin() / vb;
        let dga = ra * th.cos() / va - (ra * th.sin()).powi(2) * rho / va.powi(3);
        let dgb = rb * (phi - th).cos() / vb - (rb * (phi - th).sin()).powi(2) * rho / vb.powi(3);
        let dg = dga + dgb;
        if dg.abs() < 1e-300 {
            break;
        }
        let step = g / dg;
        let next = (th - step).clamp(0.0, phi);
        let done = (next - th).abs() < 1e-16;
        th = next;
        if done {
            break;
        }
    }
    let dir = linalg::axpy(&linalg::scale(&e1, th.cos()), th.sin(), &e2);
    linalg::axpy(c, rho, &dir)
}

/// Chain optimizer shared by the open and periodic cases. `period_shift` is
/// the lattice shift applied when wrapping (None for open chains).
struct Chain {
    nodes: Vec<Node>,
    period_shift: Option<Vec<f64>>,
}

impl Chain {
    fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Neighbor positions of node `j` (cyclic with shift when periodic).
    fn neighbors(&self, j: usize) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let n = self.len();
        let prev = if j > 0 {
            Some(self.nodes[j - 1].position().to_vec())
        } else { self.period_shift.as_ref().map(|shift| linalg::sub(self.nodes[n - 1].position(), shift)) };
        let next = if j + 1 < n {
            Some(self.nodes[j + 1].position().to_vec())
        } else { self.period_shift.as_ref().map(|shift| linalg::add(self.nodes[0].position(), shift)) };
        (prev, next)
    }

    fn length(&self) -> f64 {
        let n = self.len();
        let mut total = 0.0;
        for j in 0..n - 1 {
            total += linalg::dist(self.nodes[j].position(), self.nodes[j + 1].position());
        }
        if let Some(shift) = &self.period_shift {
            total += linalg::dist(
                self.nodes[n - 1].position(),
                &linalg::add(self.nodes[0].position(), shift),
            );
        }
        total
    }

    /// One relaxation sweep; returns the maximal point movement.
    fn sweep(&mut self) -> f64 {
        let mut max_move = 0.0_f64;
        for j in 0..self.len() {
            let (prev, next) = self.neighbors(j);
            if let Node::Sphere { ball, point } = &self.nodes[j] {
                let ball = ball.clone();
                let old = point.clone();
                let new = match (prev, next) {
                    (Some(a), Some(b)) => bounce_point(&ball, &a, &b),
                    (Some(a), None) | (None, Some(a)) => {
                        // Free endpoint: nearest boundary point to the single
                        // neighbor.
                        let w = linalg::sub(&a, &ball.center);
                        match linalg::normalized(&w) {
                            Some(u) => linalg::axpy(&ball.center, ball.radius, &u),
                            None => old.clone(),
                        }
                    }
                    (None, None) => old.clone(),
                };
                max_move = max_move.max(linalg::dist(&old, &new));
                self.nodes[j] = Node::Sphere { ball, point: new };
            }
        }
        max_move
    }

    /// Tangential gradient norms per sphere node with two neighbors, and the
    /// overall maximum reflection defect in radians.
    fn residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.len() {
            let (prev, next) = self.neighbors(j);
            if let (Node::Sphere { ball, point }, Some(a), Some(b)) = (&self.nodes[j], prev, next)
            {
                let n = linalg::scale(&linalg::sub(point, &ball.center), 1.0 / ball.radius);
                let v_in = match linalg::normalized(&linalg::sub(point, &a)) {
                    Some(v) => v,
                    None => continue,
                };
                let v_out = match linalg::normalized(&linalg::sub(&b, point)) {
                    Some(v) => v,
                    None => continue,
                };
                let reflected = linalg::reflect(&v_in, &n);
                worst = worst.max(linalg::angle_between(&reflected, &v_out));
            }
        }
        worst
    }

    /// Simultaneous Gauss-Newton polish on the stacked tangential gradients.
    /// Only attempted on small systems; keeps the iterate only when the
    /// residual improves.
    fn polish(&mut self) {
        let m = match self.nodes.iter().find_map(|n| match n {
            Node::Sphere { ball, .. } => Some(ball.center.len()),
            Node::Fixed(p) => Some(p.len()),
        }) {
            Some(m) => m,
            None => return,
        };
        let free: Vec<usize> = (0..self.len())
            .filter(|&j| {
                matches!(self.nodes[j], Node::Sphere { .. }) && {
                    let (a, b) = self.neighbors(j);
                    a.is_some() && b.is_some()
                }
            })
            .collect();
        let dims = free.len() * (m - 1);
        if dims == 0 || dims > 240 {
            return;
        }

        let frames: Vec<Vec<Vec<f64>>> = free
            .iter()
            .map(|&j| match &self.nodes[j] {
                Node::Sphere { ball, point } => {
                    tangent_frame(&linalg::sub(point, &ball.center))
                }
                _ => unreachable!(),
            })
            .collect();

        let eval = |chain: &Chain| -> Vec<f64> {
            let mut r = Vec::with_capacity(dims);
            for (fi, &j) in free.iter().enumerate() {
                let (a, b) = chain.neighbors(j);
                let (a, b) = (a.unwrap(), b.unwrap());
                if let Node::Sphere { point, .. } = &chain.nodes[j] {
                    let g = grad_sum(point, &a, &b);
                    for tau in &frames[fi] {
                        r.push(linalg::dot(&g, tau));
                    }
                }
            }
            r
        };

        let apply = |chain: &Chain, delta: &[f64]| -> Chain {
            let mut out = chain.clone_nodes();
            for (fi, &j) in free.iter().enumerate() {
                if let Node::Sphere { ball, point } = &chain.nodes[j] {
                    let mut p = point.clone();
                    for (ti, tau) in frames[fi].iter().enumerate() {
                        p = linalg::axpy(&p, delta[fi * (m - 1) + ti], tau);
                    }
                    // Re-project to the sphere.
                    let u = linalg::normalized(&linalg::sub(&p, &ball.center)).unwrap();
                    out.nodes[j] = Node::Sphere {
                        ball: ball.clone(),
                        point: linalg::axpy(&ball.center, ball.radius, &u),
                    };
                }
            }
            out
        };

        let r0 = eval(self);
        let norm0 = linalg::norm(&r0);
        if norm0 == 0.0 {
            return;
        }
        // Finite-difference Jacobian.
        let h = 1e-7;
        let mut jac = vec![vec![0.0; dims]; dims];
        for col in 0..dims {
            let mut delta = vec![0.0; dims];
            delta[col] = h;
            let shifted = apply(self, &delta);
            let r1 = eval(&shifted);
            for row in 0..dims {
                jac[row][col] = (r1[row] - r0[row]) / h;
            }
        }
        if let Some(step) = solve_dense(&mut jac, &r0.iter().map(|x| -x).collect::<Vec<_>>()) {
            let cand = apply(self, &step);
            if cand.residual() < self.residual() {
                self.nodes = cand.nodes;
            }
        }
    }

    fn clone_nodes(&self) -> Chain {
        Chain {
            nodes: self.nodes.clone(),
            period_shift: self.period_shift.clone(),
        }
    }
}

/// Gradient of |x - a| + |x - b| at x.
fn grad_sum(x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let ga = linalg::normalized(&linalg::sub(x, a)).unwrap_or_else(|| vec![0.0; x.len()]);
    let gb = linalg::normalized(&linalg::sub(x, b)).unwrap_or_else(|| vec![0.0; x.len()]);
    linalg::add(&ga, &gb)
}

/// Orthonormal basis of the tangent space at radial direction `w`.
fn tangent_frame(w: &[f64]) -> Vec<Vec<f64>> {
    let m = w.len();
    let n = linalg::normalized(w).expect("radial direction nonzero");
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
    for axis in 0..m {
        if frame.len() == m - 1 {
            break;
        }
        let mut v = vec![0.0; m];
        v[axis] = 1.0;
        let mut u = linalg::axpy(&v, -linalg::dot(&v, &n), &n);
        for f in &frame {
            u = linalg::axpy(&u, -linalg::dot(&u, f), f);
        }
        if let Some(u) = linalg::normalized(&u) {
            if linalg::norm(&u) > 0.5 {
                frame.push(u);
            }
        }
    }
    frame
}

/// Gaussian elimination with partial pivoting; `None` for singular systems.
fn solve_dense(a: &mut [Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut x = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        x.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= a[col][col];
        for row in 0..col {
            x[row] -= a[row][col] * x[col];
        }
    }
    Some(x)
}

/// Deterministic initialization: each typed point starts at the boundary
/// point nearest the segment joining its neighbors' obstacle centers (or
/// anchor points).
fn init_chain(chain: &mut Chain, neighbor_anchor: &[Vec<f64>]) {
    for j in 0..chain.len() {
        if let Node::Sphere { ball, .. } = &chain.nodes[j] {
            let n = chain.len();
            let prev = if j > 0 {
                neighbor_anchor[j - 1].clone()
            } else if let Some(shift) = &chain.period_shift {
                linalg::sub(&neighbor_anchor[n - 1], shift)
            } else {
                neighbor_anchor[j].clone()
            };
            let next = if j + 1 < n {
                neighbor_anchor[j + 1].clone()
            } else if let Some(shift) = &chain.period_shift {
                linalg::add(&neighbor_anchor[0], shift)
            } else {
                neighbor_anchor[j].clone()
            };
            let (_, t) = linalg::point_segment_distance(&ball.center, &prev, &next);
            let foot = linalg::lerp(&prev, &next, t);
            let dir = match linalg::normalized(&linalg::sub(&foot, &ball.center)) {
                Some(u) => u,
                None => {
                    let mut e = vec![0.0; ball.center.len()];
                    e[0] = 1.0;
                    e
                }
            };
            let point = linalg::axpy(&ball.center, ball.radius, &dir);
            let ball = ball.clone();
            chain.nodes[j] = Node::Sphere { ball, point };
        }
    }
}

/// Run relaxation to convergence, then polish. Returns (sweeps, length trace).
///
/// The movement exit scales with the coordinate magnitude: pieces that run
/// hundreds of cells out carry coordinates whose spacing is far above 1e-15,
/// so an absolute threshold would never fire there.
fn optimize(chain: &mut Chain) -> Result<(usize, Vec<f64>), VarError> {
    let coord_scale = chain
        .nodes
        .iter()
        .flat_map(|n| n.position().iter())
        .fold(1.0_f64, |acc, &x| acc.max(x.abs()));
    let move_tol = 1e-14 * coord_scale;
    let mut lengths = Vec::new();
    let mut sweeps = 0;
    loop {
        let moved = chain.sweep();
        sweeps += 1;
        lengths.push(chain.length());
        if sweeps >= 8 && (moved < move_tol || chain.residual() < 1e-13) {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            break;
        }
    }
    chain.polish();
    lengths.push(chain.length());
    let residual = chain.residual();
    if residual > REFLECTION_TOLERANCE {
        return Err(VarError::Stagnation { sweeps, residual });
    }
    Ok((sweeps, lengths))
}

/// Indices of typed obstacles incident to segment `seg` of a polyline whose
/// node `i` corresponds to typed entry `typed_of[i]`.
fn check_grazing(chain: &Chain, typed_index: &[Option<usize>]) -> Result<(), VarError> {
    for j in 0..chain.len() {
        let (prev, next) = chain.neighbors(j);
        if let (Node::Sphere { ball, point }, Some(a), Some(b)) = (&chain.nodes[j], prev, next) {
            let n = linalg::scale(&linalg::sub(point, &ball.center), 1.0 / ball.radius);
            for v in [linalg::sub(point, &a), linalg::sub(&b, point)] {
                if let Some(u) = linalg::normalized(&v) {
                    let cos_incidence = linalg::dot(&u, &n).abs();
                    let impact = ball.radius * (1.0 - cos_incidence * cos_incidence).max(0.0).sqrt();
                    if ball.radius - impact < GRAZING_TOLERANCE {
                        return Err(VarError::Grazing {
                            index: typed_index[j].unwrap_or(j),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Exact segment clearance from every non-incident obstacle in a window, plus
/// a 64-point discretized cross-check. Also rejects segments that re-enter an
/// incident ball, except through the ball of a pinned path endpoint (a broken
/// path with a fixed boundary endpoint may cross its own first or last
/// obstacle; only interior reflections forbid it).
fn check_clearance(
    scene: &Scene,
    chain: &Chain,
    ids: &[Option<LatticeObstacleId>],
    period_cells: Option<&[i64]>,
    exempt_ends: (bool, bool),
) -> Result<f64, VarError> {
    let n = chain.len();
    let mut min_clearance = f64::INFINITY;
    let segment_count = if chain.period_shift.is_some() { n } else { n - 1 };
    for seg in 0..segment_count {
        let p = chain.nodes[seg].position().to_vec();
        let q = if seg + 1 < n {
            chain.nodes[seg + 1].position().to_vec()
        } else {
            linalg::add(
                chain.nodes[0].position(),
                chain.period_shift.as_ref().unwrap(),
            )
        };
        let wrap_target = if seg + 1 == n {
            // The wrap segment ends on the shifted copy of the first obstacle.
            ids[0]
                .as_ref()
                .map(|id| id.translated(period_cells.expect("periodic chain has period cells")))
        } else {
            ids[seg + 1].clone()
        };
        let incident: Vec<LatticeObstacleId> = [ids[seg].clone(), wrap_target]
            .into_iter()
            .flatten()
            .collect();
        let exempt: Vec<&LatticeObstacleId> = [
            (seg == 0 && exempt_ends.0).then(|| ids[seg].as_ref()).flatten(),
            (seg + 1 == segment_count && exempt_ends.1)
                .then(|| ids[n - 1].as_ref())
                .flatten(),
        ]
        .into_iter()
        .flatten()
        .collect();
        // Window of candidate obstacles around the segment.
        for label in scene.labels() {
            let ob = scene.obstacle(label);
            let mut lo = Vec::with_capacity(scene.m);
            let mut hi = Vec::with_capacity(scene.m);
            // One extra cell beyond the touch window keeps the reported
            // minimum clearance finite for short segments.
            for i in 0..scene.m {
                let a = p[i].min(q[i]) - ob.radius - ob.center[i];
                let b = p[i].max(q[i]) + ob.radius - ob.center[i];
                lo.push((a - 1e-9).ceil() as i64 - 1);
                hi.push((b + 1e-9).floor() as i64 + 1);
            }
            for cell in lattice::box_points(&lo, &hi) {
                let cand = LatticeObstacleId::new(cell, label);
                let ball = scene.ball(&cand);
                let (dist, t) = linalg::point_segment_distance(&ball.center, &p, &q);
                if exempt.iter().any(|i| scene.same_ball(i, &cand)) {
                    continue;
                }
                let is_incident = incident.iter().any(|i| scene.same_ball(i, &cand));
                if is_incident {
                    // Touching at the endpoint is expected; interior
                    // penetration is not.
                    if t > 1e-9 && t < 1.0 - 1e-9 && dist < ball.radius - 1e-9 {
                        return Err(VarError::Clearance {
                            segment: seg,
                            obstacle: cand,
                            depth: ball.radius - dist,
                        });
                    }
                    continue;
                }
                let clearance = dist - ball.radius;
                if clearance <= 0.0 {
                    return Err(VarError::Clearance {
                        segment: seg,
                        obstacle: cand,
                        depth: -clearance,
                    });
                }
                min_clearance = min_clearance.min(clearance);
                // Discretized cross-check of the exact distance formula.
                if cfg!(debug_assertions) {
                    for k in 0..=64 {
                        let x = linalg::lerp(&p, &q, k as f64 / 64.0);
                        assert!(
                            linalg::dist(&x, &ball.center) >= ball.radius - 1e-9,
                            "discretized clearance check failed"
                        );
                    }
                }
            }
        }
    }
    Ok(min_clearance)
}

fn build_typed_nodes(scene: &Scene, seq: &SymbolicSequence) -> (Vec<Node>, Vec<Ball>) {
    let balls: Vec<Ball> = seq.entries.iter().map(|e| scene.ball(e)).collect();
    let nodes = balls
        .iter()
        .map(|b| Node::Sphere {
            ball: b.clone(),
            point: b.center.clone(),
        })
        .collect();
    (nodes, balls)
}

fn anchor_outside_check(scene: &Scene, p: &[f64], which: &'static str) -> Result<(), VarError> {
    if p.len() != scene.m {
        return Err(VarError::BadEndpoint {
            which,
            reason: format!("expected {} coordinates, got {}", scene.m, p.len()),
        });
    }
    for label in scene.labels() {
        let ob = scene.obstacle(label);
        let cell: Vec<i64> = p
            .iter()
            .zip(&ob.center)
            .map(|(x, c)| (x - c).round() as i64)
            .collect();
        let ball = scene.ball(&LatticeObstacleId::new(cell, label));
        if linalg::dist(p, &ball.center) < ball.radius - 1e-12 {
            return Err(VarError::BadEndpoint {
                which,
                reason: format!("point lies inside obstacle {label}"),
            });
        }
    }
    Ok(())
}

/// Minimize an open piece of the given admissible type.
///
/// With [`Endpoints::Anchors`] every typed point reflects between free-space
/// anchor points; with [`Endpoints::Boundary`] the first and last typed
/// points are pinned to the given boundary points; with [`Endpoints::Free`]
/// they are optimized too. The accepted piece is the unique shortest path of
/// its type for the given constraints, up to the reflection tolerance.
pub fn minimize_open(
    scene: &Scene,
    seq: &SymbolicSequence,
    endpoints: Endpoints,
) -> Result<TrajectoryPiece, VarError> {
    minimize_open_from(scene, seq, endpoints, None)
}

/// [`minimize_open`] with explicit initial sphere points (used for restart
/// studies); `None` uses the deterministic nearest-segment initialization.
pub fn minimize_open_from(
    scene: &Scene,
    seq: &SymbolicSequence,
    endpoints: Endpoints,
    initial: Option<Vec<Vec<f64>>>,
) -> Result<TrajectoryPiece, VarError> {
    let verdict = check_admissible(scene, seq);
    if let Some(v) = verdict.violation {
        return Err(VarError::NotAdmissible(v));
    }
    let (typed_nodes, balls) = build_typed_nodes(scene, seq);
    let s = typed_nodes.len();

    let mut nodes = Vec::new();
    let mut typed_index: Vec<Option<usize>> = Vec::new();
    let mut ids: Vec<Option<LatticeObstacleId>> = Vec::new();
    let (start_anchor, end_anchor) = match &endpoints {
        Endpoints::Anchors { start, end } => {
            anchor_outside_check(scene, start, "start")?;
            anchor_outside_check(scene, end, "end")?;
            (Some(start.clone()), Some(end.clone()))
        }
        Endpoints::Boundary { start, end } => {
            if s < 2 {
                return Err(VarError::BadEndpoint {
                    which: "start",
                    reason: "boundary endpoints need at least two typed entries".into(),
                });
            }
            for (which, p, ball) in [("start", start, &balls[0]), ("end", end, &balls[s - 1])] {
                let off = (linalg::dist(p, &ball.center) - ball.radius).abs();
                if off > 1e-9 {
                    return Err(VarError::BadEndpoint {
                        which,
                        reason: format!("point is {off:e} off the obstacle boundary"),
                    });
                }
            }
            (None, None)
        }
        Endpoints::Free => {
            if s < 2 {
                return Err(VarError::BadEndpoint {
                    which: "start",
                    reason: "free endpoints need at least two typed entries".into(),
                });
            }
            (None, None)
        }
    };

    if let Some(a) = &start_anchor {
        nodes.push(Node::Fixed(a.clone()));
        typed_index.push(None);
        ids.push(None);
    }
    for (i, node) in typed_nodes.into_iter().enumerate() {
        let pinned = match (&endpoints, i) {
            (Endpoints::Boundary { start, .. }, 0) => Some(start.clone()),
            (Endpoints::Boundary { end, .. }, i_) if i_ == s - 1 => Some(end.clone()),
            _ => None,
        };
        match pinned {
            Some(p) => nodes.push(Node::Fixed(p)),
            None => nodes.push(node),
        }
        typed_index.push(Some(i));
        ids.push(Some(seq.entries[i].clone()));
    }
    if let Some(a) = &end_anchor {
        nodes.push(Node::Fixed(a.clone()));
        typed_index.push(None);
        ids.push(None);
    }

    let mut chain = Chain {
        nodes,
        period_shift: None,
    };
    let anchors: Vec<Vec<f64>> = chain
        .nodes
        .iter()
        .map(|n| match n {
            Node::Fixed(p) => p.clone(),
            Node::Sphere { ball, .. } => ball.center.clone(),
        })
        .collect();
    init_chain(&mut chain, &anchors);
    if let Some(init) = initial {
        assert_eq!(init.len(), s, "one initial point per typed entry");
        for (i, p) in init.into_iter().enumerate() {
            let j = if start_anchor.is_some() { i + 1 } else { i };
            if let Node::Sphere { ball, .. } = &chain.nodes[j] {
                let u = linalg::normalized(&linalg::sub(&p, &ball.center))
                    .expect("initial point must not be the center");
                let ball = ball.clone();
                let point = linalg::axpy(&ball.center, ball.radius, &u);
                chain.nodes[j] = Node::Sphere { ball, point };
            }
        }
    }

    let (sweeps, lengths_by_sweep) = optimize(&mut chain)?;
    check_grazing(&chain, &typed_index)?;
    // Pinned or free boundary endpoints are path ends; their own segment may
    // cross their obstacle (anchored ends reflect, so no exemption there).
    let path_end_exempt = !matches!(endpoints, Endpoints::Anchors { .. });
    let min_clearance = check_clearance(
        scene,
        &chain,
        &ids,
        None,
        (path_end_exempt, path_end_exempt),
    )?;

    let first_typed = if start_anchor.is_some() { 1 } else { 0 };
    let points: Vec<Vec<f64>> = chain.nodes[first_typed..first_typed + s]
        .iter()
        .map(|n| n.position().to_vec())
        .collect();
    let displacement = linalg::sub(&points[s - 1], &points[0]);
    Ok(TrajectoryPiece {
        sequence: seq.clone(),
        points,
        start_anchor,
        end_anchor,
        length: chain.length(),
        displacement,
        residual: chain.residual(),
        min_clearance,
        sweeps,
        lengths_by_sweep,
    })
}

/// Minimize a periodic orbit of the given cycle type. The cyclic length with
/// the next period shifted by the lattice period vector is minimized over one
/// period of boundary points; the rotation vector is the period vector over
/// the period length, exactly.
pub fn minimize_periodic(scene: &Scene, ptype: &PeriodicType) -> Result<PeriodicOrbit, VarError> {
    let verdict = check_admissible(scene, &ptype.expand(3));
    if let Some(v) = verdict.violation {
        return Err(VarError::NotAdmissible(v));
    }
    let q = ptype.q();
    let (nodes, _balls) = build_typed_nodes(scene, &ptype.cycle);
    let shift = lattice::to_f64(&ptype.period_cells);
    let mut chain = Chain {
        nodes,
        period_shift: Some(shift),
    };
    let anchors: Vec<Vec<f64>> = chain
        .nodes
        .iter()
        .map(|n| match n {
            Node::Fixed(p) => p.clone(),
            Node::Sphere { ball, .. } => ball.center.clone(),
        })
        .collect();
    init_chain(&mut chain, &anchors);

    let typed_index: Vec<Option<usize>> = (0..q).map(Some).collect();
    let ids: Vec<Option<LatticeObstacleId>> =
        ptype.cycle.entries.iter().map(|e| Some(e.clone())).collect();
    let (sweeps, _lengths) = optimize(&mut chain)?;
    check_grazing(&chain, &typed_index)?;
    let min_clearance = check_clearance(
        scene,
        &chain,
        &ids,
        Some(&ptype.period_cells),
        (false, false),
    )?;

    let period_length = chain.length();
    let rotation_vector = linalg::scale(&lattice::to_f64(&ptype.period_cells), 1.0 / period_length);
    Ok(PeriodicOrbit {
        ptype: ptype.clone(),
        q,
        period_cells: ptype.period_cells.clone(),
        points: chain.nodes.iter().map(|n| n.position().to_vec()).collect(),
        period_length,
        rotation_vector,
        residual: chain.residual(),
        min_clearance,
        sweeps,
    })
}

/// Maximal reflection defect of an open piece, recomputed from its points.
pub fn reflection_residual_piece(scene: &Scene, piece: &TrajectoryPiece) -> f64 {
    let chain = piece_chain(scene, piece);
    chain.residual()
}

/// Maximal reflection defect of a periodic orbit including the closure point.
pub fn reflection_residual_orbit(scene: &Scene, orbit: &PeriodicOrbit) -> f64 {
    let nodes = orbit
        .ptype
        .cycle
        .entries
        .iter()
        .zip(&orbit.points)
        .map(|(e, p)| Node::Sphere {
            ball: scene.ball(e),
            point: p.clone(),
        })
        .collect();
    Chain {
        nodes,
        period_shift: Some(lattice::to_f64(&orbit.period_cells)),
    }
    .residual()
}

fn piece_chain(scene: &Scene, piece: &TrajectoryPiece) -> Chain {
    let mut nodes = Vec::new();
    if let Some(a) = &piece.start_anchor {
        nodes.push(Node::Fixed(a.clone()));
    }
    for (e, p) in piece.sequence.entries.iter().zip(&piece.points) {
        nodes.push(Node::Sphere {
            ball: scene.ball(e),
            point: p.clone(),
        });
    }
    if let Some(a) = &piece.end_anchor {
        nodes.push(Node::Fixed(a.clone()));
    }
    Chain {
        nodes,
        period_shift: None,
    }
}

/// Spread of lengths and displacements over random boundary endpoint pairs
/// for a fixed admissible type. Both are bounded by twice the maximal
/// diameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    pub trials: usize,
    pub max_length_spread: f64,
    pub max_displacement_spread: f64,
    pub bound: f64,
}

pub fn length_gap_check(
    scene: &Scene,
    seq: &SymbolicSequence,
    trials: usize,
    rng: &mut impl rand::Rng,
) -> Result<GapReport, VarError> {
    assert!(trials >= 2);
    let s = seq.len();
    assert!(s >= 2, "gap check needs at least two typed entries");
    let first = scene.ball(&seq.entries[0]);
    let last = scene.ball(&seq.entries[s - 1]);
    let mut lengths = Vec::with_capacity(trials);
    let mut displacements = Vec::with_capacity(trials);
    for _ in 0..trials {
        let start = linalg::axpy(&first.center, first.radius, &random_unit(scene.m, rng));
        let end = linalg::axpy(&last.center, last.radius, &random_unit(scene.m, rng));
        let piece = minimize_open(scene, seq, Endpoints::Boundary { start, end })?;
        lengths.push(piece.length);
        displacements.push(piece.displacement);
    }
    let mut max_length_spread = 0.0_f64;
    let mut max_displacement_spread = 0.0_f64;
    for i in 0..trials {
        for j in i + 1..trials {
            max_length_spread = max_length_spread.max((lengths[i] - lengths[j]).abs());
            max_displacement_spread =
                max_displacement_spread.max(linalg::dist(&displacements[i], &displacements[j]));
        }
    }
    Ok(GapReport {
        trials,
        max_length_spread,
        max_displacement_spread,
        bound: 2.0 * scene.max_diameter(),
    })
}

/// Uniform random unit vector.
pub fn random_unit(m: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m)
            .map(|_| {
                // Box-Muller pair, one component used.
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        if let Some(u) = linalg::normalized(&v) {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissible::enumerate_periodic;
    use crate::admissible::build_transition_graph;
    use crate::scene::Obstacle;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn s1() -> Scene {
        Scene::new(
            2,
            vec![Obstacle {
                center: vec![0.5, 0.5],
                radius: 0.1,
            }],
            1e-12,
        )
        .unwrap()
    }

    fn s2() -> Scene {
        Scene::new(
            2,
            vec![
                Obstacle {
                    center: vec![0.25, 0.25],
                    radius: 0.15,
                },
                Obstacle {
                    center: vec![0.75, 0.75],
                    radius: 0.15,
                },
            ],
            1e-12,
        )
        .unwrap()
    }

    fn single_bounce_seq() -> SymbolicSequence {
        SymbolicSequence::new(vec![LatticeObstacleId::new(vec![0, 0], 1)])
    }

    #[test]
    fn mirror_symmetric_single_reflection() {
        // Anchors symmetric about x = 0.5 force the reflection at the top of
        // the ball: point (0.5, 0.6), length 2 |(0.2, 0.1)|.
        let scene = s1();
        let piece = minimize_open(
            &scene,
            &single_bounce_seq(),
            Endpoints::Anchors {
                start: vec![0.3, 0.7],
                end: vec![0.7, 0.7],
            },
        )
        .unwrap();
        assert!((piece.points[0][0] - 0.5).abs() < 1e-9);
        assert!((piece.points[0][1] - 0.6).abs() < 1e-9);
        assert!((piece.length - 0.447_213_595_499_958).abs() < 1e-9);
        assert!(piece.residual < 1e-10);
        assert!(piece.min_clearance > 0.0);
    }

    #[test]
    fn restarts_agree_to_1e6() {
        let scene = s1();
        let endpoints = Endpoints::Anchors {
            start: vec![0.3, 0.7],
            end: vec![0.7, 0.7],
        };
        let reference = minimize_open(&scene, &single_bounce_seq(), endpoints.clone()).unwrap();
        let mut rng = StdRng::seed_from_u64(123);
        for _ in 0..20 {
            let init = vec![linalg::axpy(
                &vec![0.5, 0.5],
                0.1,
                &random_unit(2, &mut rng),
            )];
            let piece = minimize_open_from(
                &scene,
                &single_bounce_seq(),
                endpoints.clone(),
                Some(init),
            )
            .unwrap();
            assert!(linalg::dist(&piece.points[0], &reference.points[0]) < 1e-6);
            assert!((piece.length - reference.length).abs() < 1e-6);
        }
    }

    #[test]
    fn two_reflection_piece_on_the_diagonal() {
        // Anchors on the main diagonal between the obstacles: head-on bounces
        // at the facing boundary points, all on the diagonal.
        let scene = s2();
        let seq = SymbolicSequence::new(vec![
            LatticeObstacleId::new(vec![0, 0], 1),
            LatticeObstacleId::new(vec![0, 0], 2),
        ]);
        let piece = minimize_open(
            &scene,
            &seq,
            Endpoints::Anchors {
                start: vec![0.45, 0.45],
                end: vec![0.55, 0.55],
            },
        )
        .unwrap();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let x0 = 0.25 + 0.15 * inv_sqrt2;
        let x1 = 0.75 - 0.15 * inv_sqrt2;
        assert!((piece.points[0][0] - x0).abs() < 1e-9, "{:?}", piece.points);
        assert!((piece.points[0][1] - x0).abs() < 1e-9);
        assert!((piece.points[1][0] - x1).abs() < 1e-9);
        assert!((piece.points[1][1] - x1).abs() < 1e-9);
        // Frozen closed form: chord 2*(sqrt(2)/2 - 0.3)/2 plus two anchor legs.
        assert!((piece.length - 0.672_792_206_135_785_6).abs() < 1e-9);
    }

    #[test]
    fn points_stay_on_spheres_and_displacement_bounded() {
        let scene = s2();
        let seq = SymbolicSequence::new(vec![
            LatticeObstacleId::new(vec![0, 0], 1),
            LatticeObstacleId::new(vec![0, 0], 2),
            LatticeObstacleId::new(vec![1, 0], 1),
            LatticeObstacleId::new(vec![1, 0], 2),
        ]);
        let mut rng = StdRng::seed_from_u64(5);
        let first = scene.ball(&seq.entries[0]);
        let last = scene.ball(&seq.entries[3]);
        for _ in 0..10 {
            let piece = minimize_open(
                &scene,
                &seq,
                Endpoints::Boundary {
                    start: linalg::axpy(&first.center, first.radius, &random_unit(2, &mut rng)),
                    end: linalg::axpy(&last.center, last.radius, &random_unit(2, &mut rng)),
                },
            )
            .unwrap();
            for (e, p) in seq.entries.iter().zip(&piece.points) {
                let ball = scene.ball(e);
                assert!((linalg::dist(p, &ball.center) - ball.radius).abs() < 1e-10);
            }
            assert!(linalg::norm(&piece.displacement) <= piece.length + 1e-12);
            assert!(piece.residual < 1e-10);
        }
    }

    #[test]
    fn non_admissible_type_is_rejected() {
        let scene = s1();
        let seq = SymbolicSequence::new(vec![
            LatticeObstacleId::new(vec![0, 0], 1),
            LatticeObstacleId::new(vec![1, 0], 1),
            LatticeObstacleId::new(vec![2, 0], 1),
        ]);
        let err = minimize_open(&scene, &seq, Endpoints::Free);
        assert!(matches!(err, Err(VarError::NotAdmissible(_))));
    }

    #[test]
    fn lengths_are_monotone_during_refinement() {
        let scene = s2();
        let seq = SymbolicSequence::new(vec![
            LatticeObstacleId::new(vec![0, 0], 1),
            LatticeObstacleId::new(vec![0, 0], 2),
            LatticeObstacleId::new(vec![0, 1], 1),
        ]);
        let piece = minimize_open(&scene, &seq, Endpoints::Free).unwrap();
        for w in piece.lengths_by_sweep.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "length increased: {w:?}");
        }
    }

    #[test]
    fn minimizer_is_shortest_among_random_feasible_paths() {
        let scene = s2();
        let seq = SymbolicSequence::new(vec![
            LatticeObstacleId::new(vec![0, 0], 1),
            LatticeObstacleId::new(vec![0, 0], 2),
            LatticeObstacleId::new(vec![1, 0], 1),
        ]);
        let first = scene.ball(&seq.entries[0]);
        let last = scene.ball(&seq.entries[2]);
        let start = linalg::axpy(&first.center, first.radius, &[-1.0, 0.0]);
        let end = linalg::axpy(&last.center, last.radius, &[1.0, 0.0]);
        let piece = minimize_open(
            &scene,
            &seq,
            Endpoints::Boundary {
                start: start.clone(),
                end: end.clone(),
            },
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(999);
        for _ in 0..100 {
            // Random feasible broken path of the same type and endpoints.
            let mid_ball = scene.ball(&seq.entries[1]);
            let mid = linalg::axpy(&mid_ball.center, mid_ball.radius, &random_unit(2, &mut rng));
            let len = linalg::dist(&start, &mid) + linalg::dist(&mid, &end);
            assert!(piece.length <= len + 1e-12);
        }
    }

    #[test]
    fn bounce_orbit_length_matches_chord() {
        let scene = s2();
        let ptype = PeriodicType {
            cycle: SymbolicSequence::new(vec![
                LatticeObstacleId::new(vec![0, 0], 1),
                LatticeObstacleId::new(vec![0, 0], 2),
            ]),
            period_cells: vec![0, 0],
        };
        let orbit = minimize_periodic(&scene, &ptype).unwrap();
        // Chord between the balls, traversed both ways.
        let expect = 2.0 * (std::f64::consts::SQRT_2 / 2.0 - 0.3);
        assert!((orbit.period_length - expect).abs() < 1e-9);
        assert_eq!(orbit.rotation_vector, vec![0.0, 0.0]);
        assert!(orbit.residual < 1e-10);
        assert!(orbit.min_clearance > 0.0);
    }

    #[test]
    fn rotation_vector_definition_and_norm() {
        let scene = s2();
        let graph = build_transition_graph(&scene, 1);
        let (cycles, _) = enumerate_periodic(&scene, &graph, 2, None);
        let translating = cycles
            .iter()
            .find(|c| c.p != vec![0, 0])
            .expect("translating 2-cycle");
        let orbit = minimize_periodic(&scene, &translating.ptype).unwrap();
        let expect = linalg::scale(
            &lattice::to_f64(&orbit.period_cells),
            1.0 / orbit.period_length,
        );
        assert_eq!(orbit.rotation_vector, expect);
        assert!(linalg::norm(&orbit.rotation_vector) < 1.0);
    }

    #[test]
    fn rotation_vector_invariant_under_cycle_rotation() {
        let scene = s2();
        let graph = build_transition_graph(&scene, 1);
        let (cycles, _) = enumerate_periodic(&scene, &graph, 4, None);
        let cycle = cycles.iter().find(|c| c.p != vec![0, 0]).unwrap();
        let orbit = minimize_periodic(&scene, &cycle.ptype).unwrap();
        for shift in 1..cycle.q {
            let rotated = cycle.ptype.rotated(shift);
            let other = minimize_periodic(&scene, &rotated).unwrap();
            assert!((other.period_length - orbit.period_length).abs() < 1e-9);
            assert!(
                linalg::dist(&other.rotation_vector, &orbit.rotation_vector) < 1e-9
            );
        }
    }

    #[test]
    fn perturbed_point_has_positive_residual() {
        let scene = s1();
        let mut piece = minimize_open(
            &scene,
            &single_bounce_seq(),
            Endpoints::Anchors {
                start: vec![0.3, 0.7],
                end: vec![0.7, 0.7],
            },
        )
        .unwrap();
        assert!(reflection_residual_piece(&scene, &piece) < 1e-12);
        // Slide the point 1e-3 along the sphere.
        let ball = scene.ball(&piece.sequence.entries[0]);
        let p = &piece.points[0];
        let tangent = vec![-(p[1] - ball.center[1]), p[0] - ball.center[0]];
        let moved = linalg::axpy(p, 1e-2, &linalg::normalized(&tangent).unwrap());
        let back = linalg::normalized(&linalg::sub(&moved, &ball.center)).unwrap();
        piece.points[0] = linalg::axpy(&ball.center, ball.radius, &back);
        assert!(reflection_residual_piece(&scene, &piece) > 1e-4);
    }

    #[test]
    fn gap_report_bounded_by_twice_diameter() {
        let scene = s2();
        let seq = SymbolicSequence::new(vec![
            LatticeObstacleId::new(vec![0, 0], 1),
            LatticeObstacleId::new(vec![0, 0], 2),
            LatticeObstacleId::new(vec![1, 0], 1),
            LatticeObstacleId::new(vec![1, 0], 2),
        ]);
        let mut rng = StdRng::seed_from_u64(2024);
        let report = length_gap_check(&scene, &seq, 40, &mut rng).unwrap();
        assert!(report.max_length_spread <= report.bound);
        assert!(report.max_displacement_spread <= report.bound);
        assert!(report.max_length_spread > 0.0);
    }

    #[test]
    fn identical_endpoints_give_zero_spread() {
        let scene = s2();
        let seq = SymbolicSequence::new(vec![
            LatticeObstacleId::new(vec![0, 0], 1),
            LatticeObstacleId::new(vec![0, 0], 2),
        ]);
        let first = scene.ball(&seq.entries[0]);
        let last = scene.ball(&seq.entries[1]);
        let start = linalg::axpy(&first.center, first.radius, &[0.0, -1.0]);
        let end = linalg::axpy(&last.center, last.radius, &[0.0, 1.0]);
        let a = minimize_open(
            &scene,
            &seq,
            Endpoints::Boundary {
                start: start.clone(),
                end: end.clone(),
            },
        )
        .unwrap();
        let b = minimize_open(&scene, &seq, Endpoints::Boundary { start, end }).unwrap();
        assert!((a.length - b.length).abs() < 1e-12);
    }
}
