//! Ray casting against the obstacle lattice.
//!
//! Cells are visited in entry order (the classic incremental grid traversal,
//! generalized to m axes). Obstacles are strictly inside their cells, so a ray
//! inside cell `c` can only meet balls homed in `c`; the one-cell halo is kept
//! for floating-point safety near cell boundaries.

use crate::linalg;
use crate::scene::{LatticeObstacleId, Scene};

/// First intersection of a ray with a lattice ball.
#[derive(Debug, Clone)]
pub struct RayHit {
    /// Ray parameter (arc length for unit directions).
    pub t: f64,
    pub point: Vec<f64>,
    pub id: LatticeObstacleId,
    /// Distance from the ball center to the ray line.
    pub impact_parameter: f64,
}

/// Entry intersection of the ray `o + t u` (u unit) with a sphere, for rays
/// starting outside the ball. Uses the cancellation-free root form.
pub fn ray_sphere_entry(
    origin: &[f64],
    dir: &[f64],
    center: &[f64],
    radius: f64,
) -> Option<(f64, f64)> {
    let w = linalg::sub(center, origin);
    let b = linalg::dot(&w, dir);
    let c0 = linalg::dot(&w, &w) - radius * radius;
    if c0 <= 0.0 {
        // Origin inside or on the ball: no entry from outside.
        return None;
    }
    if b <= 0.0 {
        return None;
    }
    let disc = radius * radius - (linalg::dot(&w, &w) - b * b);
    if disc < 0.0 {
        return None;
    }
    let mut t = c0 / (b + disc.sqrt());
    // Newton refinement of ||o + t u - c||^2 = r^2; near-tangential roots are
    // ill-conditioned in closed form.
    for _ in 0..2 {
        let p = linalg::axpy(origin, t, dir);
        let wp = linalg::sub(&p, center);
        let f = linalg::dot(&wp, &wp) - radius * radius;
        let df = 2.0 * linalg::dot(&wp, dir);
        if df.abs() > 1e-300 {
            t -= f / df;
        }
    }
    let impact = (linalg::dot(&w, &w) - b * b).max(0.0).sqrt();
    Some((t, impact))
}

/// Earliest lattice-ball intersection along the ray, or `None` if the ray
/// travels `cutoff_cells` cells without hitting anything. `exclude` skips one
/// obstacle id entirely (used for rays anchored at an obstacle center).
///
/// Hits closer than `1e-9` along the ray are ignored so that rays may start
/// on an obstacle boundary.
pub fn first_hit(
    scene: &Scene,
    origin: &[f64],
    dir: &[f64],
    cutoff_cells: i64,
    exclude: Option<&LatticeObstacleId>,
) -> Option<RayHit> {
    let m = scene.m;
    debug_assert!((linalg::norm(dir) - 1.0).abs() < 1e-9, "direction must be unit");
    const T_SKIP: f64 = 1e-9;

    let mut cell: Vec<i64> = origin.iter().map(|&x| x.floor() as i64).collect();
    let mut t_max = vec![f64::INFINITY; m];
    let mut t_delta = vec![f64::INFINITY; m];
    let mut step = vec![0i64; m];
    for i in 0..m {
        if dir[i] > 0.0 {
            step[i] = 1;
            t_delta[i] = 1.0 / dir[i];
            t_max[i] = ((cell[i] + 1) as f64 - origin[i]) / dir[i];
        } else if dir[i] < 0.0 {
            step[i] = -1;
            t_delta[i] = -1.0 / dir[i];
            t_max[i] = (origin[i] - cell[i] as f64) / -dir[i];
        }
    }

    let mut best: Option<RayHit> = None;
    let mut t_entry = 0.0_f64;
    let halo = linalg::lattice::box_points(&vec![-1; m], &vec![1; m]);

    for _ in 0..cutoff_cells {
        if let Some(hit) = &best {
            if t_entry > hit.t + 1e-9 {
                break;
            }
        }
        for offset in &halo {
            let home = linalg::lattice::add(&cell, offset);
            for label in scene.labels() {
                let id = LatticeObstacleId::new(home.clone(), label);
                if exclude.is_some_and(|e| scene.same_ball(e, &id)) {
                    continue;
                }
                let ball = scene.ball(&id);
                if let Some((t, impact)) = ray_sphere_entry(origin, dir, &ball.center, ball.radius)
                {
                    if t > T_SKIP && best.as_ref().is_none_or(|h| t < h.t) {
                        best = Some(RayHit {
                            t,
                            point: linalg::axpy(origin, t, dir),
                            id,
                            impact_parameter: impact,
                        });
                    }
                }
            }
        }
        // Advance to the next cell in entry order.
        let axis = (0..m)
            .min_by(|&a, &b| t_max[a].partial_cmp(&t_max[b]).unwrap())
            .unwrap();
        if !t_max[axis].is_finite() {
            break;
        }
        t_entry = t_max[axis];
        cell[axis] += step[axis];
        t_max[axis] += t_delta[axis];
    }
    best
}
