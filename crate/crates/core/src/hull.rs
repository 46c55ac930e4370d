//! Convex hulls of rotation-sample clouds.
//!
//! Exact hulls are produced for the plane (monotone chain) and for three
//! dimensions (incremental visibility). Higher dimensions report support
//! values along requested directions instead.

use crate::linalg;

/// Indices of the hull vertices of a planar point cloud, counterclockwise,
/// starting from the lexicographically smallest point. Collinear points on
/// the boundary are dropped. Returns all points for clouds of size < 3.
pub fn convex_hull_2d(points: &[Vec<f64>]) -> Vec<usize> {
    let n = points.len();
    if n < 3 {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        points[a]
            .partial_cmp(&points[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx.dedup_by(|&mut a, &mut b| linalg::dist(&points[a], &points[b]) < 1e-15);

    let cross = |o: usize, a: usize, b: usize| -> f64 {
        let (po, pa, pb) = (&points[o], &points[a], &points[b]);
        (pa[0] - po[0]) * (pb[1] - po[1]) - (pa[1] - po[1]) * (pb[0] - po[0])
    };

    let mut lower: Vec<usize> = Vec::new();
    for &p in &idx {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &p in idx.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Triangular facets (as index triples, outward-oriented) of the hull of a
/// 3-d point cloud. `None` when the cloud is degenerate (fewer than four
/// affinely independent points).
pub fn convex_hull_3d(points: &[Vec<f64>]) -> Option<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 4 {
        return None;
    }
    let sub = |a: usize, b: usize| linalg::sub(&points[a], &points[b]);
    let cross3 = |a: &[f64], b: &[f64]| -> Vec<f64> {
        vec![
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };

    // Initial tetrahedron: two distinct points, a third off the line, a
    // fourth off the plane.
    let i0 = 0;
    let i1 = (1..n).find(|&i| linalg::dist(&points[i], &points[i0]) > 1e-12)?;
    let i2 = (1..n).find(|&i| {
        i != i1 && linalg::norm(&cross3(&sub(i1, i0), &sub(i, i0))) > 1e-12
    })?;
    let base_normal = cross3(&sub(i1, i0), &sub(i2, i0));
    let i3 = (1..n).find(|&i| {
        i != i1 && i != i2 && linalg::dot(&base_normal, &sub(i, i0)).abs() > 1e-12
    })?;

    // Faces oriented with outward normals relative to the centroid.
    let centroid: Vec<f64> = (0..3)
        .map(|c| (points[i0][c] + points[i1][c] + points[i2][c] + points[i3][c]) / 4.0)
        .collect();
    let orient = |f: [usize; 3]| -> [usize; 3] {
        let nrm = cross3(&sub(f[1], f[0]), &sub(f[2], f[0]));
        let to_centroid = linalg::sub(&centroid, &points[f[0]]);
        if linalg::dot(&nrm, &to_centroid) > 0.0 {
            [f[0], f[2], f[1]]
        } else {
            f
        }
    };
    let mut faces: Vec<[usize; 3]> = vec![
        orient([i0, i1, i2]),
        orient([i0, i1, i3]),
        orient([i0, i2, i3]),
        orient([i1, i2, i3]),
    ];

    let outward = |f: &[usize; 3]| -> Vec<f64> { cross3(&sub(f[1], f[0]), &sub(f[2], f[0])) };

    for p in 0..n {
        if [i0, i1, i2, i3].contains(&p) {
            continue;
        }
        // Faces visible from p.
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                let nrm = outward(f);
                linalg::dot(&nrm, &sub(p, f[0])) > 1e-12 * linalg::norm(&nrm).max(1e-30)
            })
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        // Horizon edges: edges of visible faces shared with invisible ones.
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        for &fi in &visible {
            let f = faces[fi];
            for e in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                // An edge is on the horizon iff its reverse is not an edge of
                // another visible face.
                let shared = visible.iter().any(|&gj| {
                    if gj == fi {
                        return false;
                    }
                    let g = faces[gj];
                    [(g[0], g[1]), (g[1], g[2]), (g[2], g[0])].contains(&(e.1, e.0))
                });
                if !shared {
                    horizon.push(e);
                }
            }
        }
        let mut keep: Vec<[usize; 3]> = faces
            .iter()
            .enumerate()
            .filter(|(i, _)| !visible.contains(i))
            .map(|(_, f)| *f)
            .collect();
        for (a, b) in horizon {
            keep.push([a, b, p]);
        }
        faces = keep;
    }
    Some(faces)
}

/// Largest projection of the cloud onto a direction.
pub fn support_value(points: &[Vec<f64>], direction: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| linalg::dot(p, direction))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn square_hull_has_four_corners() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![0.25, 0.5],
        ];
        let hull = convex_hull_2d(&pts);
        assert_eq!(hull.len(), 4);
        assert!(!hull.contains(&4));
        assert!(!hull.contains(&5));
    }

    #[test]
    fn hull_2d_contains_all_points_by_support() {
        let mut rng = StdRng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let hull = convex_hull_2d(&pts);
        let hull_pts: Vec<Vec<f64>> = hull.iter().map(|&i| pts[i].clone()).collect();
        for k in 0..64 {
            let th = k as f64 / 64.0 * std::f64::consts::TAU;
            let d = vec![th.cos(), th.sin()];
            assert!(support_value(&pts, &d) <= support_value(&hull_pts, &d) + 1e-12);
        }
    }

    #[test]
    fn hull_2d_invariant_under_interior_points() {
        let mut rng = StdRng::seed_from_u64(10);
        let mut pts: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let hull1: Vec<Vec<f64>> = convex_hull_2d(&pts)
            .iter()
            .map(|&i| pts[i].clone())
            .collect();
        // Midpoints of random pairs are redundant.
        for _ in 0..100 {
            let a = rng.gen_range(0..50);
            let b = rng.gen_range(0..50);
            pts.push(crate::linalg::lerp(&pts[a], &pts[b], rng.gen_range(0.0..1.0)));
        }
        let hull2: Vec<Vec<f64>> = convex_hull_2d(&pts)
            .iter()
            .map(|&i| pts[i].clone())
            .collect();
        assert_eq!(hull1.len(), hull2.len());
        for (p, q) in hull1.iter().zip(&hull2) {
            assert!(crate::linalg::dist(p, q) < 1e-12);
        }
    }

    #[test]
    fn cube_hull_has_twelve_facets() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(vec![x, y, z]);
                }
            }
        }
        pts.push(vec![0.5, 0.5, 0.5]);
        let faces = convex_hull_3d(&pts).unwrap();
        assert_eq!(faces.len(), 12);
        assert!(faces.iter().all(|f| !f.contains(&8)));
    }

    #[test]
    fn hull_3d_support_matches_cloud_support() {
        let mut rng = StdRng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                vec![
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let faces = convex_hull_3d(&pts).unwrap();
        let mut verts: Vec<usize> = faces.iter().flatten().copied().collect();
        verts.sort_unstable();
        verts.dedup();
        let hull_pts: Vec<Vec<f64>> = verts.iter().map(|&i| pts[i].clone()).collect();
        for _ in 0..64 {
            let d = crate::varpath::random_unit(3, &mut rng);
            assert!(support_value(&pts, &d) <= support_value(&hull_pts, &d) + 1e-10);
        }
    }

    #[test]
    fn degenerate_3d_cloud_is_rejected() {
        let pts = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0],
        ];
        assert!(convex_hull_3d(&pts).is_none());
    }
}
