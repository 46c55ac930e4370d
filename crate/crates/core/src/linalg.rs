//! Small dense-vector helpers over `&[f64]`.
//!
//! The torus dimension `m` is a runtime value (usually 2 or 3), so points and
//! directions are plain `Vec<f64>` slices rather than fixed-size arrays.

/// Dot product. Panics on length mismatch in debug builds.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b` in one pass.
#[inline]
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Linear interpolation `(1 - t) * a + t * b`.
#[inline]
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// Unit vector along `a`. Returns `None` when `a` is numerically zero.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n < 1e-300 {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

/// Distance from `p` to the closed segment `[a, b]`, together with the
/// parameter of the nearest point. Allocation-free: this sits in the inner
/// loops of the blocker search and the clearance checks.
pub fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut denom = 0.0;
    let mut along = 0.0;
    for i in 0..p.len() {
        let ab = b[i] - a[i];
        denom += ab * ab;
        along += (p[i] - a[i]) * ab;
    }
    let t = if denom < 1e-300 {
        0.0
    } else {
        (along / denom).clamp(0.0, 1.0)
    };
    let mut d2 = 0.0;
    for i in 0..p.len() {
        let e = p[i] - ((1.0 - t) * a[i] + t * b[i]);
        d2 += e * e;
    }
    (d2.sqrt(), t)
}

/// Reflect direction `v` across the hyperplane with unit normal `n`:
/// `v - 2 <v, n> n`.
pub fn reflect(v: &[f64], n: &[f64]) -> Vec<f64> {
    let c = 2.0 * dot(v, n);
    axpy(v, -c, n)
}

/// Angle between two vectors in radians. Uses the two-chord form
/// `2 atan2(|a_hat - b_hat|, |a_hat + b_hat|)`, which stays accurate near 0
/// and near pi where the arccosine loses half the significant digits.
pub fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na < 1e-300 || nb < 1e-300 {
        return 0.0;
    }
    let ah = scale(a, 1.0 / na);
    let bh = scale(b, 1.0 / nb);
    2.0 * dist(&ah, &bh).atan2(norm(&add(&ah, &bh)))
}

/// Integer lattice vector helpers.
pub mod lattice {
    /// `a + b` componentwise.
    pub fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    /// `a - b` componentwise.
    pub fn sub(a: &[i64], b: &[i64]) -> Vec<i64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn neg(a: &[i64]) -> Vec<i64> {
        a.iter().map(|x| -x).collect()
    }

    pub fn is_zero(a: &[i64]) -> bool {
        a.iter().all(|&x| x == 0)
    }

    pub fn linf(a: &[i64]) -> i64 {
        a.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn to_f64(a: &[i64]) -> Vec<f64> {
        a.iter().map(|&x| x as f64).collect()
    }

    /// All lattice points of the axis-aligned box `lo[i]..=hi[i]`, in
    /// lexicographic order. Empty when some `lo[i] > hi[i]`.
    pub fn box_points(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
        let m = lo.len();
        if lo.iter().zip(hi).any(|(l, h)| l > h) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut cur = lo.to_vec();
        'outer: loop {
            out.push(cur.clone());
            let mut axis = m;
            loop {
                if axis == 0 {
                    break 'outer;
                }
                axis -= 1;
                if cur[axis] < hi[axis] {
                    cur[axis] += 1;
                    for i in axis + 1..m {
                        cur[i] = lo[i];
                    }
                    break;
                }
            }
        }
        out
    }
}
