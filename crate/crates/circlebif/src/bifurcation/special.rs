//! Codimension-two points and distinguished curve points: cusps,
//! horizontal/vertical tangencies of the parameter-plane projection, and
//! transverse intersections of fold curves.

use serde::{Deserialize, Serialize};

use crate::family::FamilySpec;
use crate::linalg::{dist3, norm3, scale3, solve, sub3};
use crate::rational::Rational;
use crate::scalar::{real, Scalar};

use super::trace::SaddleNodeCurve;
use super::{correct_on_hyperplane, cusp_newton, BifError, ContinuationSystem};

/// Nondegeneracy values below this flag a cusp (or an intersection) as
/// failing the generic-position conditions.
pub const GENERIC_TOL: f64 = 1e-8;
/// Two preimage phases closer than this are the same orbit, not an
/// intersection of distinct folds.
pub const DISTINCT_ORBIT_TOL: f64 = 1e-6;
/// Cusp deduplication radius.
pub const CUSP_DEDUPE: f64 = 1e-7;

/// A converged cusp: parabolic point with vanishing second derivative,
/// with its two nondegeneracy numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CuspPoint<S> {
    /// (s, theta, x).
    pub pos: [S; 3],
    /// Third x-derivative of the iterate; zero would be a higher-order
    /// degeneracy.
    pub dxxx: S,
    /// Parameter-transversality value `ds*dxtheta - dtheta*dxs`.
    pub cusp_transversality: S,
    pub non_generic: bool,
    pub res_h1: S,
    pub res_h2: S,
    pub res_dxx: S,
}

impl<S: Scalar> CuspPoint<S> {
    pub(crate) fn from_system(pos: [S; 3], sys: &ContinuationSystem<S>) -> Self {
        let non_generic = sys.dxxx.abs() < real(GENERIC_TOL)
            || sys.cusp_transversality.abs() < real(GENERIC_TOL);
        CuspPoint {
            pos,
            dxxx: sys.dxxx,
            cusp_transversality: sys.cusp_transversality,
            non_generic,
            res_h1: sys.h1.abs(),
            res_h2: sys.h2.abs(),
            res_dxx: sys.dxx.abs(),
        }
    }
}

/// Full Newton on (H1, H2, dxx F^q) from every seed; converged solutions
/// inside the parameter box are deduplicated and reported with their
/// nondegeneracy values. Non-convergent seeds are dropped.
pub fn find_cusps<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    seeds: &[[S; 3]],
) -> Vec<CuspPoint<S>> {
    let b = spec.param_box;
    let margin = real::<S>(1e-6);
    let mut cusps: Vec<CuspPoint<S>> = Vec::new();
    for &seed in seeds {
        let Some((pos, sys)) = cusp_newton(spec, pq, seed) else {
            continue;
        };
        let inside = pos[0] >= b.s[0] - margin
            && pos[0] <= b.s[1] + margin
            && pos[1] >= b.theta[0] - margin
            && pos[1] <= b.theta[1] + margin;
        if !inside {
            continue;
        }
        let mut pos = pos;
        let mut wrapped = pos[2] - pos[2].floor();
        if wrapped == S::one() {
            wrapped = S::zero();
        }
        pos[2] = wrapped;
        if cusps
            .iter()
            .any(|c| cusp_distance(c.pos, pos) < real(CUSP_DEDUPE))
        {
            continue;
        }
        cusps.push(CuspPoint::from_system(pos, &sys));
    }
    cusps.sort_by(|a, b| {
        a.pos
            .partial_cmp(&b.pos)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    cusps
}

fn cusp_distance<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
    let dp = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let dx = (a[2] - b[2]).abs();
    let dx = dx - dx.floor();
    dp + dx.min(S::one() - dx)
}

/// Direction of a distinguished tangent in the parameter-plane projection.
/// With the s-axis drawn vertically, a horizontal tangent means ds = 0 and
/// a vertical one dtheta = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TangentDirection {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpecialPoint<S> {
    pub pos: [S; 3],
    pub tangent: [S; 3],
}

/// Locates sign changes of the tangent's ds (horizontal) or dtheta
/// (vertical) component along a traced curve and refines each by bisection
/// on corrector hyperplanes to 1e-8 arclength.
pub fn find_special_points<S: Scalar>(
    spec: &FamilySpec<S>,
    curve: &SaddleNodeCurve<S>,
    direction: TangentDirection,
) -> Result<Vec<SpecialPoint<S>>, BifError<S>> {
    if curve.points.len() < 2 {
        return Err(BifError::CurveTooShort);
    }
    let comp = match direction {
        TangentDirection::Horizontal => 0,
        TangentDirection::Vertical => 1,
    };
    let mut out = Vec::new();
    for w in curve.points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.tangent[comp] == S::zero() {
            out.push(SpecialPoint { pos: a.pos, tangent: a.tangent });
            continue;
        }
        if a.tangent[comp].signum() == b.tangent[comp].signum() {
            continue;
        }
        let mut lo = (a.pos, a.tangent);
        let mut hi = (b.pos, b.tangent);
        for _ in 0..80 {
            if dist3(lo.0, hi.0) < real(1e-8) {
                break;
            }
            let mid = [
                (lo.0[0] + hi.0[0]) * real(0.5),
                (lo.0[1] + hi.0[1]) * real(0.5),
                (lo.0[2] + hi.0[2]) * real(0.5),
            ];
            let dir = sub3(hi.0, lo.0);
            let n = norm3(dir);
            if n < real(1e-14) {
                break;
            }
            let normal = scale3(dir, S::one() / n);
            let Some((pos, sys, _)) =
                correct_on_hyperplane(spec, curve.pq, mid, mid, normal, real(1e-11), 25)
            else {
                break;
            };
            let Ok(t) = super::tangent_vector(&sys) else {
                break;
            };
            let t = if crate::linalg::dot3(t, lo.1) < S::zero() {
                [-t[0], -t[1], -t[2]]
            } else {
                t
            };
            if t[comp].signum() == lo.1[comp].signum() {
                lo = (pos, t);
            } else {
                hi = (pos, t);
            }
        }
        out.push(SpecialPoint { pos: lo.0, tangent: lo.1 });
    }
    Ok(out)
}

/// A polyline-level crossing candidate in the (s, theta) projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawCrossing<S> {
    pub curves: [usize; 2],
    pub param: [S; 2],
    pub x1: S,
    pub x2: S,
}

/// Pairwise segment intersection of the curves' parameter-plane
/// projections (self-pairs included, skipping adjacent segments). Crossing
/// parameters and the two phases are linearly interpolated; pairs whose
/// phases coincide are the same orbit seen twice and are not crossings.
pub fn polyline_crossings<S: Scalar>(curves: &[SaddleNodeCurve<S>]) -> Vec<RawCrossing<S>> {
    let mut out: Vec<RawCrossing<S>> = Vec::new();
    let eps = real::<S>(1e-9);
    for i in 0..curves.len() {
        for j in i..curves.len() {
            let (ci, cj) = (&curves[i], &curves[j]);
            for (ia, wa) in ci.points.windows(2).enumerate() {
                let start_b = if i == j { ia + 2 } else { 0 };
                for (ib, wb) in cj.points.windows(2).enumerate().skip(start_b) {
                    if i == j && ia == 0 && ib + 2 == cj.points.len() {
                        // First and last segment of a closed loop share the
                        // seed point.
                        continue;
                    }
                    let Some((u, v)) = segment_intersection(
                        [wa[0].pos[0], wa[0].pos[1]],
                        [wa[1].pos[0], wa[1].pos[1]],
                        [wb[0].pos[0], wb[0].pos[1]],
                        [wb[1].pos[0], wb[1].pos[1]],
                        eps,
                    ) else {
                        continue;
                    };
                    let x1 = wa[0].pos[2] + (wa[1].pos[2] - wa[0].pos[2]) * u;
                    let x2 = wb[0].pos[2] + (wb[1].pos[2] - wb[0].pos[2]) * v;
                    if circle_gap(x1, x2) <= real(DISTINCT_ORBIT_TOL) {
                        continue;
                    }
                    let param = [
                        wa[0].pos[0] + (wa[1].pos[0] - wa[0].pos[0]) * u,
                        wa[0].pos[1] + (wa[1].pos[1] - wa[0].pos[1]) * u,
                    ];
                    // A crossing at a shared polyline vertex registers in
                    // every adjacent segment pair; keep one.
                    let dup = out.iter().any(|r: &RawCrossing<S>| {
                        r.curves == [i, j]
                            && (r.param[0] - param[0]).abs() < real(1e-8)
                            && (r.param[1] - param[1]).abs() < real(1e-8)
                            && circle_gap(r.x1, x1) < real(1e-6)
                    });
                    if dup {
                        continue;
                    }
                    out.push(RawCrossing { curves: [i, j], param, x1, x2 });
                }
            }
        }
    }
    out
}

fn circle_gap<S: Scalar>(a: S, b: S) -> S {
    let d = (a - b).abs();
    let d = d - d.floor();
    d.min(S::one() - d)
}

/// Intersection parameters (u, v) of segments [p1, p2] and [q1, q2], both
/// within [0, 1] up to a small endpoint slack.
fn segment_intersection<S: Scalar>(
    p1: [S; 2],
    p2: [S; 2],
    q1: [S; 2],
    q2: [S; 2],
    eps: S,
) -> Option<(S, S)> {
    let d1 = [p2[0] - p1[0], p2[1] - p1[1]];
    let d2 = [q2[0] - q1[0], q2[1] - q1[1]];
    let det = d1[0] * (-d2[1]) - (-d2[0]) * d1[1];
    let len = (d1[0].abs() + d1[1].abs()) * (d2[0].abs() + d2[1].abs());
    if det.abs() <= len * real(1e-14) {
        return None;
    }
    let r = [q1[0] - p1[0], q1[1] - p1[1]];
    let u = (r[0] * (-d2[1]) - (-d2[0]) * r[1]) / det;
    let v = (d1[0] * r[1] - d1[1] * r[0]) / det;
    let lo = -eps;
    let hi = S::one() + eps;
    if u >= lo && u <= hi && v >= lo && v <= hi {
        Some((u, v))
    } else {
        None
    }
}

/// A refined intersection of two fold branches at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IntersectionRecord<S> {
    pub curves: [usize; 2],
    /// (s, theta).
    pub param: [S; 2],
    pub x1: S,
    pub x2: S,
    /// `dtheta(x2) ds(x1) - dtheta(x1) ds(x2)` of the iterate: the
    /// projection-transversality determinant.
    pub transversality_det: S,
    pub non_generic_tangency: bool,
}

/// Polyline crossings refined by a four-variable Newton on both parabolic
/// conditions simultaneously: unknowns (s, theta, x1, x2), residuals
/// (H1, H2) at each phase.
pub fn find_intersections<S: Scalar>(
    spec: &FamilySpec<S>,
    curves: &[SaddleNodeCurve<S>],
) -> Vec<IntersectionRecord<S>> {
    let mut out: Vec<IntersectionRecord<S>> = Vec::new();
    for raw in polyline_crossings(curves) {
        let pq = curves[raw.curves[0]].pq;
        let Some(record) = refine_crossing(spec, pq, &raw) else {
            continue;
        };
        if !spec.param_box.contains_with_margin(
            crate::family::ParamPoint::new(record.param[0], record.param[1]),
            real(1e-9),
        ) {
            continue;
        }
        let dup = out.iter().any(|r| {
            (r.param[0] - record.param[0]).abs() < real(1e-7)
                && (r.param[1] - record.param[1]).abs() < real(1e-7)
                && circle_gap(r.x1, record.x1).min(circle_gap(r.x1, record.x2)) < real(1e-5)
        });
        if !dup {
            out.push(record);
        }
    }
    out.sort_by(|a, b| {
        (a.param, a.x1)
            .partial_cmp(&(b.param, b.x1))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

fn refine_crossing<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    raw: &RawCrossing<S>,
) -> Option<IntersectionRecord<S>> {
    let tol = real::<S>(super::SOLVE_TOL);
    let mut state = [raw.param[0], raw.param[1], raw.x1, raw.x2];
    for _ in 0..50 {
        let sys1 = ContinuationSystem::at(spec, pq, [state[0], state[1], state[2]]);
        let sys2 = ContinuationSystem::at(spec, pq, [state[0], state[1], state[3]]);
        let res = [sys1.h1, sys1.h2, sys2.h1, sys2.h2];
        if res.iter().all(|r| r.abs() < tol) {
            let (x1, x2, s1, s2) = if state[2] <= state[3] {
                (state[2], state[3], &sys1, &sys2)
            } else {
                (state[3], state[2], &sys2, &sys1)
            };
            let det = s2.dtheta * s1.ds - s1.dtheta * s2.ds;
            if circle_gap(x1, x2) <= real(DISTINCT_ORBIT_TOL) {
                return None;
            }
            return Some(IntersectionRecord {
                curves: raw.curves,
                param: [state[0], state[1]],
                x1,
                x2,
                transversality_det: det,
                non_generic_tangency: det.abs() < real(GENERIC_TOL),
            });
        }
        let jac = [
            [sys1.grad_h1[0], sys1.grad_h1[1], sys1.grad_h1[2], S::zero()],
            [sys1.grad_h2[0], sys1.grad_h2[1], sys1.grad_h2[2], S::zero()],
            [sys2.grad_h1[0], sys2.grad_h1[1], S::zero(), sys2.grad_h1[2]],
            [sys2.grad_h2[0], sys2.grad_h2[1], S::zero(), sys2.grad_h2[2]],
        ];
        let delta = solve(jac, [-res[0], -res[1], -res[2], -res[3]])?;
        let norm = delta.iter().fold(S::zero(), |a, &v| a + v * v).sqrt();
        let cap = real::<S>(0.1);
        let scale = if norm > cap { cap / norm } else { S::one() };
        for a in 0..4 {
            state[a] = state[a] + delta[a] * scale;
        }
        if !state.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::trace::{CurvePoint, Termination};
    use crate::bifurcation::{solve_saddle_node, trace_curve, Frozen, StepControl};
    use crate::family::FamilySpec;
    use crate::scalar::linspace;

    const TAU: f64 = std::f64::consts::TAU;

    // Closed form for x + theta + s sin(2 pi x) + 0.1 sin(4 pi x): solving
    // g = g' = g'' = 0 puts the cusp at (0.2, 0, 0.5) with third
    // derivative -4.8 pi^3 and transversality 2 pi.
    #[test]
    fn designed_cusp_is_found() {
        let spec = FamilySpec::<f64>::cusp_demo();
        let pq = Rational::new(0, 1);
        let seeds: Vec<[f64; 3]> = vec![[0.15, 0.05, 0.4], [0.3, -0.05, 0.55], [0.25, 0.02, 0.48]];
        let cusps = find_cusps(&spec, pq, &seeds);
        assert_eq!(cusps.len(), 1);
        let c = &cusps[0];
        assert!((c.pos[0] - 0.2).abs() < 1e-8);
        assert!(c.pos[1].abs() < 1e-8);
        assert!((c.pos[2] - 0.5).abs() < 1e-8);
        let pi = std::f64::consts::PI;
        assert!((c.dxxx + 4.8 * pi.powi(3)).abs() < 1e-5, "dxxx {}", c.dxxx);
        assert!((c.cusp_transversality - TAU).abs() < 1e-6);
        assert!(!c.non_generic);
    }

    // On the standard family the second derivative never vanishes on the
    // fold (it equals +-2 pi s there), so there are no cusps for s >= 0.1.
    #[test]
    fn standard_family_has_no_cusps() {
        let spec = FamilySpec::<f64>::arnold_standard([0.1, 1.0]);
        let pq = Rational::new(0, 1);
        let mut seeds = Vec::new();
        for s in linspace(0.1, 1.0, 6) {
            for x in linspace(0.05, 0.95, 7) {
                seeds.push([s, 0.0, x]);
            }
        }
        assert!(find_cusps(&spec, pq, &seeds).is_empty());
        assert!(find_cusps(&spec, pq, &[]).is_empty());
    }

    #[test]
    fn no_horizontal_tangents_on_constant_slope_line() {
        let spec = FamilySpec::<f64>::arnold_standard([0.1, 1.0]);
        let pq = Rational::new(0, 1);
        let seed = solve_saddle_node(&spec, pq, [0.5, 0.08, 0.7], Frozen::S).unwrap();
        let curve = trace_curve(&spec, pq, &seed, StepControl::default()).unwrap();
        let pts = find_special_points(&spec, &curve, TangentDirection::Horizontal).unwrap();
        assert!(pts.is_empty());
        let single = SaddleNodeCurve {
            pq,
            points: curve.points[..1].to_vec(),
            termination_start: Termination::Stalled,
            termination_end: Termination::Stalled,
        };
        assert!(matches!(
            find_special_points(&spec, &single, TangentDirection::Horizontal),
            Err(BifError::CurveTooShort)
        ));
    }

    // Family with a fold at theta = -(0.3 + (s - 0.5)^2)/(2 pi) whose
    // graph over s has zero slope at s = 0.5: the projection tangent is
    // vertical (dtheta = 0) exactly there.
    #[test]
    fn vertical_tangent_at_amplitude_minimum() {
        use crate::family::{FourierMode, ParamBox, Poly2, Stage, TrigSeries};
        let spec = FamilySpec {
            param_box: ParamBox { s: [0.0, 1.0], theta: [-1.0, 1.0] },
            monotone_in_theta: true,
            stages: vec![Stage::Fourier {
                series: TrigSeries {
                    offset_poly: Poly2::theta(),
                    modes: vec![FourierMode {
                        k: 1,
                        // (0.55 - s + s^2)/(2 pi) = (0.3 + (s-0.5)^2)/(2 pi)
                        amp_sin: Poly2::new(&[
                            (0, 0, 0.55 / TAU),
                            (1, 0, -1.0 / TAU),
                            (2, 0, 1.0 / TAU),
                        ]),
                        amp_cos: Poly2::zero(),
                    }],
                },
            }],
        };
        let pq = Rational::new(0, 1);
        let seed = solve_saddle_node(&spec, pq, [0.2, 0.06, 0.7], Frozen::S).unwrap();
        let curve = trace_curve(&spec, pq, &seed, StepControl::default()).unwrap();
        let pts = find_special_points(&spec, &curve, TangentDirection::Vertical).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].pos[0] - 0.5).abs() < 1e-6, "s {}", pts[0].pos[0]);
        // Dense-resampling oracle: the theta-extremum along the curve.
        let best = curve
            .points
            .iter()
            .min_by(|a, b| a.pos[1].partial_cmp(&b.pos[1]).unwrap())
            .unwrap();
        assert!((pts[0].pos[1] - best.pos[1]).abs() < 1e-8);
        let horiz = find_special_points(&spec, &curve, TangentDirection::Horizontal).unwrap();
        assert!(horiz.is_empty());
    }

    fn straight_curve(pq: Rational, a: [f64; 3], b: [f64; 3], n: usize) -> SaddleNodeCurve<f64> {
        let mut points = Vec::new();
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let pos = [
                a[0] + (b[0] - a[0]) * t,
                a[1] + (b[1] - a[1]) * t,
                a[2] + (b[2] - a[2]) * t,
            ];
            let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let n3 = crate::linalg::norm3(d);
            points.push(CurvePoint {
                pos,
                res_h1: 0.0,
                res_h2: 0.0,
                dxx: 1.0,
                tangent: [d[0] / n3, d[1] / n3, d[2] / n3],
            });
        }
        SaddleNodeCurve {
            pq,
            points,
            termination_start: Termination::Stalled,
            termination_end: Termination::Stalled,
        }
    }

    #[test]
    fn synthetic_polyline_crossing() {
        let pq = Rational::new(0, 1);
        let a = straight_curve(pq, [0.1, -0.4, 0.2], [0.9, 0.4, 0.2], 16);
        let b = straight_curve(pq, [0.1, 0.4, 0.7], [0.9, -0.4, 0.7], 16);
        let crossings = polyline_crossings(&[a.clone(), b.clone()]);
        assert_eq!(crossings.len(), 1);
        let c = &crossings[0];
        assert!((c.param[0] - 0.5).abs() < 1e-12);
        assert!(c.param[1].abs() < 1e-12);
        assert!((c.x1 - 0.2).abs() < 1e-12 && (c.x2 - 0.7).abs() < 1e-12);
        // Disjoint curves cross nowhere.
        let far = straight_curve(pq, [0.1, 0.8, 0.4], [0.9, 0.9, 0.4], 16);
        assert!(polyline_crossings(&[a, far]).is_empty());
        // A curve against itself with the same phase is not a crossing.
        let self_touch = straight_curve(pq, [0.1, -0.4, 0.2], [0.9, 0.4, 0.2], 16);
        assert!(polyline_crossings(&[self_touch]).is_empty());
    }
}
