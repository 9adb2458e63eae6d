//! Small dense linear algebra: the Newton systems in this crate are at most
//! 4x4, so a fixed-size Gaussian elimination with partial pivoting is all we
//! need.

use crate::scalar::Scalar;

/// Solves `a * x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` when the pivot chain collapses (singular to rounding).
pub fn solve<S: Scalar, const N: usize>(mut a: [[S; N]; N], mut b: [S; N]) -> Option<[S; N]> {
    for col in 0..N {
        let mut pivot = col;
        for row in col + 1..N {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() <= S::zero() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = S::one() / a[col][col];
        for row in col + 1..N {
            let factor = a[row][col] * inv;
            if factor == S::zero() {
                continue;
            }
            for k in col..N {
                a[row][k] = a[row][k] - factor * a[col][k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = [S::zero(); N];
    for col in (0..N).rev() {
        let mut sum = b[col];
        for k in col + 1..N {
            sum = sum - a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// 2x2 determinant.
pub fn det2<S: Scalar>(a: [[S; 2]; 2]) -> S {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Frobenius condition estimate `||A||_F^2 / |det A|` for a 2x2 matrix.
pub fn cond2<S: Scalar>(a: [[S; 2]; 2]) -> S {
    let norm_sq = a.iter().flatten().fold(S::zero(), |acc, &v| acc + v * v);
    let d = det2(a).abs();
    if d == S::zero() {
        S::infinity()
    } else {
        norm_sq / d
    }
}

/// Cross product of two 3-vectors.
pub fn cross<S: Scalar>(a: [S; 3], b: [S; 3]) -> [S; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot3<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3<S: Scalar>(a: [S; 3]) -> S {
    dot3(a, a).sqrt()
}

pub fn sub3<S: Scalar>(a: [S; 3], b: [S; 3]) -> [S; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add3<S: Scalar>(a: [S; 3], b: [S; 3]) -> [S; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale3<S: Scalar>(a: [S; 3], f: S) -> [S; 3] {
    [a[0] * f, a[1] * f, a[2] * f]
}

pub fn dist3<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
    norm3(sub3(a, b))
}

/// Distance from a point to the segment `[p, q]` in 3-space.
pub fn point_segment_dist<S: Scalar>(x: [S; 3], p: [S; 3], q: [S; 3]) -> S {
    let d = sub3(q, p);
    let len_sq = dot3(d, d);
    if len_sq == S::zero() {
        return dist3(x, p);
    }
    let t = (dot3(sub3(x, p), d) / len_sq).max(S::zero()).min(S::one());
    dist3(x, add3(p, scale3(d, t)))
}

/// Distance from a point to a polyline (chain of segments).
pub fn point_polyline_dist<S: Scalar>(x: [S; 3], line: &[[S; 3]]) -> S {
    if line.is_empty() {
        return S::infinity();
    }
    if line.len() == 1 {
        return dist3(x, line[0]);
    }
    let mut best = S::infinity();
    for w in line.windows(2) {
        best = best.min(point_segment_dist(x, w[0], w[1]));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_3x3() {
        let a: [[f64; 3]; 3] = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        let b = [8.0, -11.0, -3.0];
        let x = solve(a, b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
        assert!((x[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_singular_is_none() {
        let a: [[f64; 2]; 2] = [[1.0, 2.0], [2.0, 4.0]];
        assert!(solve(a, [1.0, 2.0]).is_none());
    }

    #[test]
    fn cross_canonical() {
        let v = cross::<f64>([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert_eq!(v, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn segment_distance() {
        let d = point_segment_dist::<f64>([0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-15);
        let d = point_segment_dist::<f64>([2.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert!((d - 2.0f64.sqrt()).abs() < 1e-15);
    }
}
