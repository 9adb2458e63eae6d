//! Saddle-node continuation in the (s, theta) parameter plane.
//!
//! The implicit system is H1 = Lift(F^q)(x) - x - p and
//! H2 = d/dx Lift(F^q)(x) - 1, two equations in the three unknowns
//! (s, theta, x), so the solution set is generically a union of curves.
//! Curves are traced by pseudo-arclength continuation, terminate at the
//! parameter-box boundary or at cusps (where the second x-derivative of the
//! iterate crosses zero), and are assembled per rotation number into a
//! diagram together with cusps, horizontal tangencies, transverse
//! self-intersections and boundary hits.

mod diagram;
mod dims;
mod special;
mod trace;

pub use diagram::{assemble_diagram, BifurcationDiagram, BoundaryHit, CurveEnd, TangentRef};
pub use dims::{
    isolated_locus_codim, jet_dimension_table, jet_space_dim, multijet_space_dim,
    DimensionTable, SingularityClass,
};
pub use special::{
    find_cusps, find_intersections, find_special_points, polyline_crossings, CuspPoint,
    IntersectionRecord, RawCrossing, SpecialPoint, TangentDirection,
};
pub use trace::{trace_curve, BoxEdge, CurvePoint, SaddleNodeCurve, StepControl, Termination};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::FamilySpec;
use crate::jet::iterate_jet;
use crate::linalg::{cond2, cross, det2, norm3, solve};
use crate::rational::Rational;
use crate::scalar::{real, Scalar};

/// Residual target for converged saddle-node points.
pub const SOLVE_TOL: f64 = 1e-11;
/// Cross products below this norm signal parallel gradients.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum BifError<S: Scalar> {
    #[error("defining gradients are parallel or project degenerately at a cusp")]
    RankDeficient,
    #[error("singular Jacobian in the saddle-node system")]
    SingularSystem,
    #[error("no convergence after {0} Newton iterations")]
    NoConvergence(usize),
    #[error("seed not converged: residuals ({0:e}, {1:e})")]
    SeedNotConverged(S, S),
    #[error("curve needs at least 2 points")]
    CurveTooShort,
}

/// The saddle-node defining system and every jet-derived quantity the
/// continuation needs at one point (s, theta, x). Gradients are in
/// (s, theta, x) coordinate order.
#[derive(Debug, Clone, Copy)]
pub struct ContinuationSystem<S> {
    pub pq: Rational,
    pub h1: S,
    pub h2: S,
    pub grad_h1: [S; 3],
    pub grad_h2: [S; 3],
    /// Second x-derivative of the iterate (the fold nondegeneracy test and
    /// the third cusp equation).
    pub dxx: S,
    pub dxxx: S,
    /// Gradient of dxx, for the cusp Newton.
    pub grad_dxx: [S; 3],
    /// First-order parameter partials of the iterate.
    pub ds: S,
    pub dtheta: S,
    /// Cusp parameter-transversality value
    /// `ds * dxtheta - dtheta * dxs` of the iterate.
    pub cusp_transversality: S,
}

impl<S: Scalar> ContinuationSystem<S> {
    /// Evaluates the system at `pos = (s, theta, x)` from one iterate jet.
    pub fn at(spec: &FamilySpec<S>, pq: Rational, pos: [S; 3]) -> Self {
        let q = pq.denom() as u32;
        let it = iterate_jet(spec, q, pos[0], pos[1], pos[2]);
        let jet = &it.jet;
        let h1 = jet.value() - pos[2] - real(pq.numer() as f64);
        let dx = jet.dx();
        Self {
            pq,
            h1,
            h2: dx - S::one(),
            grad_h1: [jet.ds(), jet.dtheta(), dx - S::one()],
            grad_h2: [jet.dxs(), jet.dxtheta(), jet.dxx()],
            dxx: jet.dxx(),
            dxxx: jet.dxxx(),
            grad_dxx: [jet.partial(2, 1, 0), jet.partial(2, 0, 1), jet.dxxx()],
            ds: jet.ds(),
            dtheta: jet.dtheta(),
            cusp_transversality: jet.ds() * jet.dxtheta() - jet.dtheta() * jet.dxs(),
        }
    }

    pub fn residual(&self) -> S {
        self.h1.abs().max(self.h2.abs())
    }
}

/// Unit tangent of the saddle-node curve: the normalized cross product of
/// the two defining gradients. Errors when the gradients are parallel or
/// when the tangent's parameter-plane projection degenerates, which is the
/// cusp signature (there the tangent points purely along x).
pub fn tangent_vector<S: Scalar>(sys: &ContinuationSystem<S>) -> Result<[S; 3], BifError<S>> {
    let v = cross(sys.grad_h1, sys.grad_h2);
    let norm = norm3(v);
    if norm <= real(RANK_TOL) {
        return Err(BifError::RankDeficient);
    }
    let unit = [v[0] / norm, v[1] / norm, v[2] / norm];
    let planar = (unit[0] * unit[0] + unit[1] * unit[1]).sqrt();
    if planar <= real(RANK_TOL) {
        return Err(BifError::RankDeficient);
    }
    Ok(unit)
}

/// Which coordinate the two-variable Newton holds fixed; `Line` constrains
/// the parameters to the line through the seed with the given direction.
#[derive(Debug, Clone, Copy)]
pub enum Frozen<S> {
    S,
    Theta,
    Line { dir: [S; 2] },
}

/// A converged point of the saddle-node system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnPoint<S> {
    /// (s, theta, x).
    pub pos: [S; 3],
    pub res_h1: S,
    pub res_h2: S,
    /// Frobenius condition estimate of the final 2x2 Jacobian.
    pub condition: S,
}

/// Newton on (H1, H2) in the two coordinates left free by `frozen`,
/// using the jet-derived Jacobian. Converged when both residuals drop
/// below [`SOLVE_TOL`].
pub fn solve_saddle_node<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    seed: [S; 3],
    frozen: Frozen<S>,
) -> Result<SnPoint<S>, BifError<S>> {
    let (u1, u2): ([S; 3], [S; 3]) = match frozen {
        Frozen::S => ([S::zero(), S::one(), S::zero()], [S::zero(), S::zero(), S::one()]),
        Frozen::Theta => ([S::one(), S::zero(), S::zero()], [S::zero(), S::zero(), S::one()]),
        Frozen::Line { dir } => {
            let n = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            ([dir[0] / n, dir[1] / n, S::zero()], [S::zero(), S::zero(), S::one()])
        }
    };
    let tol = real::<S>(SOLVE_TOL);
    let mut pos = seed;
    let mut last_cond = S::one();
    for iter in 0..50 {
        let sys = ContinuationSystem::at(spec, pq, pos);
        let jac = [
            [dot(sys.grad_h1, u1), dot(sys.grad_h1, u2)],
            [dot(sys.grad_h2, u1), dot(sys.grad_h2, u2)],
        ];
        let frob = jac.iter().flatten().fold(S::zero(), |a, &v| a + v * v);
        let det = det2(jac);
        if det.abs() <= real::<S>(1e-14) * frob.max(real(1e-30)) {
            return Err(BifError::SingularSystem);
        }
        if sys.h1.abs() < tol && sys.h2.abs() < tol {
            return Ok(SnPoint {
                pos,
                res_h1: sys.h1.abs(),
                res_h2: sys.h2.abs(),
                condition: cond2(jac),
            });
        }
        let delta = solve(jac, [-sys.h1, -sys.h2]).ok_or(BifError::SingularSystem)?;
        let step = (delta[0] * delta[0] + delta[1] * delta[1]).sqrt();
        let cap = real::<S>(0.25);
        let scale = if step > cap { cap / step } else { S::one() };
        for a in 0..3 {
            pos[a] = pos[a] + (delta[0] * u1[a] + delta[1] * u2[a]) * scale;
        }
        if !pos.iter().all(|v| v.is_finite()) {
            return Err(BifError::NoConvergence(iter + 1));
        }
        last_cond = cond2(jac);
    }
    let _ = last_cond;
    Err(BifError::NoConvergence(50))
}

fn dot<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Newton for the corrector step: solves H1 = H2 = 0 on the hyperplane
/// through `target` orthogonal to `normal`. Returns the point, its system,
/// and the iteration count.
pub(crate) fn correct_on_hyperplane<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    start: [S; 3],
    target: [S; 3],
    normal: [S; 3],
    tol: S,
    max_iter: usize,
) -> Option<([S; 3], ContinuationSystem<S>, usize)> {
    let mut pos = start;
    for iter in 0..max_iter {
        let sys = ContinuationSystem::at(spec, pq, pos);
        let plane = dot(
            [pos[0] - target[0], pos[1] - target[1], pos[2] - target[2]],
            normal,
        );
        if sys.h1.abs() < tol && sys.h2.abs() < tol && plane.abs() < real(1e-9) {
            return Some((pos, sys, iter));
        }
        let jac = [sys.grad_h1, sys.grad_h2, normal];
        let delta = solve(jac, [-sys.h1, -sys.h2, -plane])?;
        let norm = norm3(delta);
        let cap = real::<S>(0.2);
        let scale = if norm > cap { cap / norm } else { S::one() };
        for a in 0..3 {
            pos[a] = pos[a] + delta[a] * scale;
        }
        if !pos.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

/// Full three-variable Newton on (H1, H2, dxx F^q); the cusp system.
pub(crate) fn cusp_newton<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    seed: [S; 3],
) -> Option<([S; 3], ContinuationSystem<S>)> {
    let tol = real::<S>(SOLVE_TOL);
    let mut pos = seed;
    for _ in 0..60 {
        let sys = ContinuationSystem::at(spec, pq, pos);
        if sys.h1.abs() < tol && sys.h2.abs() < tol && sys.dxx.abs() < tol {
            return Some((pos, sys));
        }
        let jac = [sys.grad_h1, sys.grad_h2, sys.grad_dxx];
        let delta = solve(jac, [-sys.h1, -sys.h2, -sys.dxx])?;
        let norm = norm3(delta);
        let cap = real::<S>(0.2);
        let scale = if norm > cap { cap / norm } else { S::one() };
        for a in 0..3 {
            pos[a] = pos[a] + delta[a] * scale;
        }
        if !pos.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}
