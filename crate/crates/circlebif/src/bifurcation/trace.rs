//! Pseudo-arclength tracing of saddle-node curves: Euler predictor along
//! the cross-product tangent, Newton corrector on the orthogonal
//! hyperplane, adaptive step control, and termination at the box boundary,
//! at cusps (sign change of the iterate's second x-derivative), on closed
//! loops, or on stall.

use serde::{Deserialize, Serialize};

use crate::family::FamilySpec;
use crate::linalg::{dist3, dot3, norm3, scale3, sub3};
use crate::rational::Rational;
use crate::scalar::{real, Scalar};

use super::special::CuspPoint;
use super::{
    correct_on_hyperplane, cusp_newton, tangent_vector, BifError, ContinuationSystem, Frozen,
    SnPoint,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepControl<S> {
    pub min_step: S,
    pub max_step: S,
    /// Corrector residual target.
    pub tol: S,
}

impl<S: Scalar> Default for StepControl<S> {
    fn default() -> Self {
        Self {
            min_step: real(1e-6),
            max_step: real(1e-2),
            tol: real(1e-11),
        }
    }
}

/// Edge of the parameter rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BoxEdge {
    SMin,
    SMax,
    ThetaMin,
    ThetaMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Termination<S> {
    #[serde(rename_all = "camelCase")]
    Boundary { edge: BoxEdge, near_corner: bool },
    #[serde(rename_all = "camelCase")]
    Cusp { at: [S; 3], index: Option<usize> },
    ClosedLoop,
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurvePoint<S> {
    /// (s, theta, x).
    pub pos: [S; 3],
    pub res_h1: S,
    pub res_h2: S,
    /// Second x-derivative of the iterate (fold nondegeneracy along the
    /// curve; its zero crossings flag cusps).
    pub dxx: S,
    /// Unit tangent, oriented along increasing point index.
    pub tangent: [S; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SaddleNodeCurve<S> {
    pub pq: Rational,
    pub points: Vec<CurvePoint<S>>,
    pub termination_start: Termination<S>,
    pub termination_end: Termination<S>,
}

impl<S: Scalar> SaddleNodeCurve<S> {
    pub fn positions(&self) -> Vec<[S; 3]> {
        self.points.iter().map(|p| p.pos).collect()
    }
}

const MAX_POINTS: usize = 20_000;

/// Traces the saddle-node curve through a converged seed in both
/// directions and merges the halves.
pub fn trace_curve<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    seed: &SnPoint<S>,
    ctrl: StepControl<S>,
) -> Result<SaddleNodeCurve<S>, BifError<S>> {
    let tol10 = ctrl.tol * real(10.0);
    if seed.res_h1 > tol10 || seed.res_h2 > tol10 {
        return Err(BifError::SeedNotConverged(seed.res_h1, seed.res_h2));
    }
    let sys0 = ContinuationSystem::at(spec, pq, seed.pos);
    let t0 = tangent_vector(&sys0)?;
    let seed_point = |tangent: [S; 3]| CurvePoint {
        pos: seed.pos,
        res_h1: sys0.h1.abs(),
        res_h2: sys0.h2.abs(),
        dxx: sys0.dxx,
        tangent,
    };

    let forward = trace_direction(spec, pq, seed_point(t0), t0, &ctrl);
    let backward = trace_direction(spec, pq, seed_point(neg(t0)), neg(t0), &ctrl);

    let mut points: Vec<CurvePoint<S>> = backward
        .points
        .into_iter()
        .rev()
        .map(|mut p| {
            p.tangent = neg(p.tangent);
            p
        })
        .collect();
    points.push(seed_point(t0));
    points.extend(forward.points);
    Ok(SaddleNodeCurve {
        pq,
        points,
        termination_start: backward.termination,
        termination_end: forward.termination,
    })
}

fn neg<S: Scalar>(v: [S; 3]) -> [S; 3] {
    [-v[0], -v[1], -v[2]]
}

struct HalfTrace<S> {
    /// Points beyond the seed, in traversal order.
    points: Vec<CurvePoint<S>>,
    termination: Termination<S>,
}

fn trace_direction<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    start: CurvePoint<S>,
    dir: [S; 3],
    ctrl: &StepControl<S>,
) -> HalfTrace<S> {
    let box_ = spec.param_box;
    let mut points: Vec<CurvePoint<S>> = Vec::new();
    let mut current = start;
    let mut tangent = dir;
    let mut h = ctrl.max_step / real(4.0);
    let mut travelled = S::zero();

    loop {
        if points.len() >= MAX_POINTS {
            return HalfTrace { points, termination: Termination::Stalled };
        }
        let predicted = [
            current.pos[0] + tangent[0] * h,
            current.pos[1] + tangent[1] * h,
            current.pos[2] + tangent[2] * h,
        ];
        let corrected =
            correct_on_hyperplane(spec, pq, predicted, predicted, tangent, ctrl.tol, 20);
        let Some((pos, sys, iters)) = corrected else {
            h = h * real(0.5);
            if h < ctrl.min_step {
                return HalfTrace { points, termination: Termination::Stalled };
            }
            continue;
        };

        // Leaving the box: land the endpoint exactly on the crossed edge.
        if !in_box(&box_, pos) {
            match boundary_endpoint(spec, pq, current.pos, pos, &box_) {
                Some((end_pos, end_sys, edge)) => {
                    let near_corner = corner_distance(&box_, end_pos) < real(1e-3);
                    if dist3(end_pos, current.pos) > ctrl.min_step / real(4.0) {
                        let t_end = tangent_vector(&end_sys)
                            .map(|t| orient(t, tangent))
                            .unwrap_or(tangent);
                        points.push(CurvePoint {
                            pos: end_pos,
                            res_h1: end_sys.h1.abs(),
                            res_h2: end_sys.h2.abs(),
                            dxx: end_sys.dxx,
                            tangent: t_end,
                        });
                    }
                    return HalfTrace {
                        points,
                        termination: Termination::Boundary { edge, near_corner },
                    };
                }
                None => {
                    h = h * real(0.5);
                    if h < ctrl.min_step {
                        return HalfTrace { points, termination: Termination::Stalled };
                    }
                    continue;
                }
            }
        }

        let step_len = dist3(pos, current.pos);
        if step_len > ctrl.max_step * real(2.0) {
            h = h * real(0.5);
            if h < ctrl.min_step {
                return HalfTrace { points, termination: Termination::Stalled };
            }
            continue;
        }

        let new_tangent = match tangent_vector(&sys) {
            Ok(t) => orient(t, tangent),
            Err(_) => {
                // Parameter projection degenerating: a cusp is at hand;
                // let the sign-change refinement below resolve it from a
                // smaller step.
                h = h * real(0.5);
                if h < ctrl.min_step {
                    return HalfTrace { points, termination: Termination::Stalled };
                }
                continue;
            }
        };

        // Cusp crossing: dxx changes sign along the curve.
        if sys.dxx.signum() != current.dxx.signum() && current.dxx != S::zero() {
            if let Some(cusp) = refine_cusp_on_segment(spec, pq, &current, pos, ctrl) {
                let at = cusp.pos;
                if dist3(at, current.pos) > ctrl.min_step / real(4.0) {
                    let csys = ContinuationSystem::at(spec, pq, at);
                    points.push(CurvePoint {
                        pos: at,
                        res_h1: csys.h1.abs(),
                        res_h2: csys.h2.abs(),
                        dxx: csys.dxx,
                        tangent,
                    });
                }
                return HalfTrace {
                    points,
                    termination: Termination::Cusp { at, index: None },
                };
            }
            // No cusp found despite the sign change; retry shorter.
            h = h * real(0.5);
            if h < ctrl.min_step {
                return HalfTrace { points, termination: Termination::Stalled };
            }
            continue;
        }

        // Closed loop: back near the start with an aligned tangent after
        // having travelled somewhere.
        let start_dist = dist3(pos, start.pos);
        if travelled > ctrl.max_step * real(4.0)
            && start_dist < h.max(ctrl.min_step)
            && dot3(new_tangent, dir) > real(0.9)
        {
            return HalfTrace { points, termination: Termination::ClosedLoop };
        }

        travelled = travelled + step_len;
        if step_len >= ctrl.min_step / real(4.0) {
            points.push(CurvePoint {
                pos,
                res_h1: sys.h1.abs(),
                res_h2: sys.h2.abs(),
                dxx: sys.dxx,
                tangent: new_tangent,
            });
        }
        current = CurvePoint {
            pos,
            res_h1: sys.h1.abs(),
            res_h2: sys.h2.abs(),
            dxx: sys.dxx,
            tangent: new_tangent,
        };
        tangent = new_tangent;
        h = if iters <= 4 {
            (h * real(1.5)).min(ctrl.max_step)
        } else if iters >= 12 {
            (h * real(0.5)).max(ctrl.min_step)
        } else {
            h
        };
    }
}

fn orient<S: Scalar>(t: [S; 3], previous: [S; 3]) -> [S; 3] {
    if dot3(t, previous) < S::zero() {
        neg(t)
    } else {
        t
    }
}

fn in_box<S: Scalar>(b: &crate::family::ParamBox<S>, pos: [S; 3]) -> bool {
    pos[0] >= b.s[0] && pos[0] <= b.s[1] && pos[1] >= b.theta[0] && pos[1] <= b.theta[1]
}

fn corner_distance<S: Scalar>(b: &crate::family::ParamBox<S>, pos: [S; 3]) -> S {
    let mut best = S::infinity();
    for &cs in &b.s {
        for &ct in &b.theta {
            let d = ((pos[0] - cs).powi(2) + (pos[1] - ct).powi(2)).sqrt();
            best = best.min(d);
        }
    }
    best
}

/// Finds which edge the segment from `inside` to `outside` crosses first
/// and solves the frozen-coordinate system on that edge.
fn boundary_endpoint<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    inside: [S; 3],
    outside: [S; 3],
    b: &crate::family::ParamBox<S>,
) -> Option<([S; 3], ContinuationSystem<S>, BoxEdge)> {
    let mut first: Option<(S, BoxEdge, S)> = None;
    let mut consider = |edge: BoxEdge, axis: usize, bound: S| {
        let da = outside[axis] - inside[axis];
        if da == S::zero() {
            return;
        }
        let t = (bound - inside[axis]) / da;
        if t >= -real::<S>(1e-12) && t <= S::one() + real(1e-12) {
            let better = first.map_or(true, |(tb, _, _)| t < tb);
            if better {
                first = Some((t, edge, bound));
            }
        }
    };
    consider(BoxEdge::SMin, 0, b.s[0]);
    consider(BoxEdge::SMax, 0, b.s[1]);
    consider(BoxEdge::ThetaMin, 1, b.theta[0]);
    consider(BoxEdge::ThetaMax, 1, b.theta[1]);
    let (t, edge, bound) = first?;
    let mut guess = [
        inside[0] + (outside[0] - inside[0]) * t,
        inside[1] + (outside[1] - inside[1]) * t,
        inside[2] + (outside[2] - inside[2]) * t,
    ];
    let frozen = match edge {
        BoxEdge::SMin | BoxEdge::SMax => {
            guess[0] = bound;
            Frozen::S
        }
        BoxEdge::ThetaMin | BoxEdge::ThetaMax => {
            guess[1] = bound;
            Frozen::Theta
        }
    };
    let pt = super::solve_saddle_node(spec, pq, guess, frozen).ok()?;
    let sys = ContinuationSystem::at(spec, pq, pt.pos);
    Some((pt.pos, sys, edge))
}

/// Locates the curve point with dxx = 0 between two consecutive trace
/// points: a cusp Newton from the midpoint, with a bisection along
/// corrector hyperplanes as fallback.
fn refine_cusp_on_segment<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    a: &CurvePoint<S>,
    b_pos: [S; 3],
    ctrl: &StepControl<S>,
) -> Option<CuspPoint<S>> {
    let mid = [
        (a.pos[0] + b_pos[0]) * real(0.5),
        (a.pos[1] + b_pos[1]) * real(0.5),
        (a.pos[2] + b_pos[2]) * real(0.5),
    ];
    let seg = dist3(a.pos, b_pos);
    if let Some((pos, sys)) = cusp_newton(spec, pq, mid) {
        if dist3(pos, mid) < seg * real(4.0) + real(1e-6) {
            return Some(CuspPoint::from_system(pos, &sys));
        }
    }
    // Bisection on dxx between the two points, staying on the curve.
    let mut lo = a.pos;
    let mut lo_sign = a.dxx.signum();
    let mut hi = b_pos;
    for _ in 0..60 {
        let mid = [
            (lo[0] + hi[0]) * real(0.5),
            (lo[1] + hi[1]) * real(0.5),
            (lo[2] + hi[2]) * real(0.5),
        ];
        let dir = sub3(hi, lo);
        let n = norm3(dir);
        if n < real(1e-13) {
            break;
        }
        let normal = scale3(dir, S::one() / n);
        let (pos, sys, _) =
            correct_on_hyperplane(spec, pq, mid, mid, normal, ctrl.tol, 25)?;
        if sys.dxx.signum() == lo_sign {
            lo = pos;
            lo_sign = sys.dxx.signum();
        } else {
            hi = pos;
        }
    }
    let sys = ContinuationSystem::at(spec, pq, lo);
    Some(CuspPoint::from_system(lo, &sys))
}
