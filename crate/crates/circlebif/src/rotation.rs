//! Rotation-number estimation and exact rational detection.
//!
//! The estimate is the Birkhoff average of the lift displacement, tightened
//! by continued-fraction convergents: a sup-norm defect of
//! `Lift(F^q)(x) - x - p` certifies `|rho - p/q| <= defect / q`, and a zero
//! of that displacement certifies `rho = p/q` exactly. Rationality is
//! therefore decided by orbits, not by thresholding the numeric estimate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{verify_monotone_theta, FamilySpec, ParamPoint, ThetaSlice};
use crate::jet::iterate_jet;
use crate::rational::{convergents, Rational};
use crate::scalar::{count, real, Scalar};

/// Residual below which a grid point counts as a zero of the displacement.
pub const ZERO_TOL: f64 = 1e-10;

/// Default x-grid density per unit period for rational detection.
pub const DETECT_GRID: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum RotationError<S: Scalar> {
    #[error("rotation number {0} is not attained on this slice")]
    RationalNotAttained(Rational),
    #[error("slice at s={0} is not verified monotone in theta")]
    MonotonicityUnverified(S),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RotationEstimate<S> {
    pub value: S,
    pub error_bound: S,
    pub iterations: usize,
    pub rational: Option<Rational>,
}

/// Birkhoff estimate of the rotation number over `n_iter` lift steps,
/// refined by the best-convergent correction: each convergent p/q of the
/// raw average with `q <= sqrt(n_iter)` is scored by the sup-norm defect of
/// `Lift(F^q)(x) - x - p` on a 128-point grid, which certifies
/// `|rho - p/q| <= defect/q`. When the defect grid shows an orbit the value
/// snaps to p/q exactly and the `rational` field is set; otherwise the
/// value stays at the raw average (which a rigid-rotation check shows is
/// the better estimate) and only the error bound tightens, to the
/// certified distance `|raw - p/q| + defect/q` when that beats `2/n`.
pub fn estimate_rho<S: Scalar>(
    spec: &FamilySpec<S>,
    at: ParamPoint<S>,
    n_iter: usize,
    x0: S,
) -> RotationEstimate<S> {
    let n_iter = n_iter.max(1);
    let start = x0 - x0.floor();
    let mut y = start;
    let mut winding: i64 = 0;
    for _ in 0..n_iter {
        let (next, n) = spec.step_reduced(at.s, at.theta, y);
        y = next;
        winding += n;
    }
    let raw = (real::<S>(winding as f64) + y - start) / count::<S>(n_iter);
    let mut value = raw;
    let mut bound = real::<S>(2.0) / count::<S>(n_iter);
    let mut rational = None;

    let q_cap = (n_iter as f64).sqrt().floor() as i64;
    for cand in convergents(raw.to_f64().unwrap_or(f64::NAN), q_cap.max(1)) {
        let scan = displacement_scan(spec, at, cand, 128);
        if scan.has_grid_zero {
            value = cand.to_scalar();
            bound = bound.min(real::<S>(ZERO_TOL) / count::<S>(cand.denom() as usize));
            rational = Some(cand);
            break;
        }
        // The grid sup underestimates the true sup norm; pad by half the
        // largest inter-sample jump plus a few ulps.
        let padded = scan.defect + scan.max_jump * real(0.5) + scan.defect * real(1e-12);
        let certified = (raw - cand.to_scalar()).abs()
            + padded / count::<S>(cand.denom() as usize)
            + real(1e-15);
        if certified < bound {
            bound = certified;
        }
    }

    RotationEstimate {
        value,
        error_bound: bound,
        iterations: n_iter,
        rational,
    }
}

pub(crate) struct DisplacementScan<S> {
    pub defect: S,
    pub min: (S, S),
    pub max: (S, S),
    pub max_jump: S,
    pub has_grid_zero: bool,
}

/// Evaluates `G(x) = Lift(F^q)(x) - x - p` on a uniform grid over [0, 1);
/// records the sup norm, the extremes with their locations, and whether the
/// grid itself shows a sign change or a sub-tolerance value.
pub(crate) fn displacement_scan<S: Scalar>(
    spec: &FamilySpec<S>,
    at: ParamPoint<S>,
    pq: Rational,
    grid: usize,
) -> DisplacementScan<S> {
    let q = pq.denom() as usize;
    let p = real::<S>(pq.numer() as f64);
    let m = grid.max(8);
    let mut defect = S::zero();
    let mut min = (S::infinity(), S::zero());
    let mut max = (S::neg_infinity(), S::zero());
    let mut has_grid_zero = false;
    let mut max_jump = S::zero();
    let mut prev = S::zero();
    let mut first = S::zero();
    let tol = real::<S>(ZERO_TOL);
    for i in 0..m {
        let x = count::<S>(i) / count::<S>(m);
        let g = displacement_value(spec, at, q, p, x);
        let a = g.abs();
        if a > defect {
            defect = a;
        }
        if a <= tol {
            has_grid_zero = true;
        }
        if g < min.0 {
            min = (g, x);
        }
        if g > max.0 {
            max = (g, x);
        }
        if i == 0 {
            first = g;
        } else {
            max_jump = max_jump.max((g - prev).abs());
            if g.signum() != prev.signum() {
                has_grid_zero = true;
            }
        }
        prev = g;
    }
    max_jump = max_jump.max((first - prev).abs());
    if prev.signum() != first.signum() {
        has_grid_zero = true;
    }
    DisplacementScan {
        defect,
        min,
        max,
        max_jump,
        has_grid_zero,
    }
}

pub(crate) fn displacement_value<S: Scalar>(
    spec: &FamilySpec<S>,
    at: ParamPoint<S>,
    q: usize,
    p: S,
    x: S,
) -> S {
    let mut y = x;
    let mut winding: i64 = 0;
    for _ in 0..q {
        let (next, n) = spec.step_reduced(at.s, at.theta, y);
        y = next;
        winding += n;
    }
    y + real::<S>(winding as f64) - x - p
}

/// Decides whether the map at `at` has a period-q orbit with lift exponent
/// p, i.e. whether `rho = p/q` exactly. Grid sign changes decide the bulk;
/// near a fold the interior extremum of the displacement is refined by
/// bisection on its derivative before the sign test, which keeps the
/// decision sharp much closer to the tongue boundary than the grid pitch.
pub fn rational_holds_at<S: Scalar>(
    spec: &FamilySpec<S>,
    at: ParamPoint<S>,
    pq: Rational,
    tol: S,
) -> bool {
    let q = pq.denom() as usize;
    let p = real::<S>(pq.numer() as f64);
    let grid = DETECT_GRID * q;
    let scan = displacement_scan(spec, at, pq, grid);
    if scan.has_grid_zero {
        return true;
    }
    if scan.min.0 > tol.max(S::zero()) {
        // Entirely positive on the grid: the only chance is a tangency at
        // the interior minimum.
        let refined = refine_extremum(spec, at, pq, scan.min.1, grid);
        return refined.map_or(false, |g| g <= tol);
    }
    if scan.max.0 < -tol.max(S::zero()) {
        let refined = refine_extremum(spec, at, pq, scan.max.1, grid);
        return refined.map_or(false, |g| -g <= tol);
    }
    // |G| dips below tol somewhere without a sign change; the scan already
    // reported that as a zero.
    let _ = (q, p);
    false
}

/// Locates the critical point of the displacement near `x_hint` by
/// bisection on its x-derivative and returns the displacement value there.
fn refine_extremum<S: Scalar>(
    spec: &FamilySpec<S>,
    at: ParamPoint<S>,
    pq: Rational,
    x_hint: S,
    grid: usize,
) -> Option<S> {
    let q = pq.denom() as u32;
    let p = real::<S>(pq.numer() as f64);
    let dg = |x: S| iterate_jet(spec, q, at.s, at.theta, x).jet.dx() - S::one();
    let mut h = S::one() / count::<S>(grid);
    let (mut a, mut b) = (x_hint - h, x_hint + h);
    let mut widened = 0;
    while dg(a).signum() == dg(b).signum() {
        widened += 1;
        if widened > 3 {
            return None;
        }
        h = h + h;
        a = x_hint - h;
        b = x_hint + h;
    }
    let (mut fa, _) = (dg(a), dg(b));
    for _ in 0..60 {
        let mid = (a + b) * real(0.5);
        let fm = dg(mid);
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
        if b - a < real(1e-14) {
            break;
        }
    }
    let xc = (a + b) * real(0.5);
    Some(displacement_value(spec, at, q as usize, p, xc))
}

/// Orbit-based rational detection: returns the reduced p/q with
/// `q <= q_max` whose period-q displacement has a zero at this parameter,
/// if any. Candidates are the continued-fraction convergents of the
/// rotation estimate (and of its error-bound neighbours).
pub fn detect_rational<S: Scalar>(
    spec: &FamilySpec<S>,
    at: ParamPoint<S>,
    q_max: i64,
    tol: S,
) -> Option<Rational> {
    let q_max = q_max.max(1);
    let n_iter = (100 * (q_max as usize).pow(2)).clamp(10_000, 1_000_000);
    let est = estimate_rho(spec, at, n_iter, S::zero());
    if let Some(r) = est.rational {
        if r.denom() <= q_max && rational_holds_at(spec, at, r, tol) {
            return Some(r);
        }
    }
    let value = est.value.to_f64().unwrap_or(f64::NAN);
    let bound = est.error_bound.to_f64().unwrap_or(0.0);
    let mut cands: Vec<Rational> = convergents(value, q_max);
    cands.extend(convergents(value - bound, q_max));
    cands.extend(convergents(value + bound, q_max));
    cands.sort_by_key(|c| (c.denom(), c.numer()));
    cands.dedup();
    cands.sort_by_key(|c| c.denom());
    for cand in cands {
        if rational_holds_at(spec, at, cand, tol) {
            return Some(cand);
        }
    }
    None
}

/// A located mode-locking interval: the endpoints and the interior seed at
/// which the orbit test first fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TongueInterval<S> {
    pub lo: S,
    pub hi: S,
    pub seed: S,
}

impl<S: Scalar> TongueInterval<S> {
    pub fn width(&self) -> S {
        self.hi - self.lo
    }
}

/// Maximal parameter interval around a seed on which the rotation number
/// locks to `pq`, located by bisection on the orbit-existence predicate to
/// endpoint width `tol`.
pub fn tongue_interval<S: Scalar>(
    slice: ThetaSlice<'_, S>,
    pq: Rational,
    tol: S,
) -> Result<TongueInterval<S>, RotationError<S>> {
    let family = slice.family;
    let s = slice.s;
    if !family.monotone_in_theta || !verify_monotone_theta(family, s, 24, 128) {
        return Err(RotationError::MonotonicityUnverified(s));
    }
    let [t_lo, t_hi] = family.param_box.theta;
    let zero_tol = real::<S>(ZERO_TOL);
    let holds = |theta: S| rational_holds_at(family, ParamPoint::new(s, theta), pq, zero_tol);
    let target = pq.to_scalar::<S>();

    // Seed: bisection steered by the rotation estimate until the orbit
    // test fires.
    let mut seed = None;
    if holds(t_lo) {
        seed = Some(t_lo);
    } else if holds(t_hi) {
        seed = Some(t_hi);
    } else {
        let est = |theta: S| estimate_rho(family, ParamPoint::new(s, theta), 4000, S::zero());
        let lo_est = est(t_lo);
        let hi_est = est(t_hi);
        if lo_est.value - lo_est.error_bound > target || hi_est.value + hi_est.error_bound < target
        {
            return Err(RotationError::RationalNotAttained(pq));
        }
        let (mut lo, mut hi) = (t_lo, t_hi);
        for _ in 0..80 {
            let mid = (lo + hi) * real(0.5);
            if holds(mid) {
                seed = Some(mid);
                break;
            }
            if est(mid).value < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < real(1e-13) {
                break;
            }
        }
    }
    let seed = seed.ok_or(RotationError::RationalNotAttained(pq))?;

    let upper = if holds(t_hi) {
        t_hi
    } else {
        let (mut inside, mut outside) = (seed, t_hi);
        while outside - inside > tol {
            let mid = (inside + outside) * real(0.5);
            if holds(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        (inside + outside) * real(0.5)
    };
    let lower = if holds(t_lo) {
        t_lo
    } else {
        let (mut inside, mut outside) = (seed, t_lo);
        while inside - outside > tol {
            let mid = (inside + outside) * real(0.5);
            if holds(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        (inside + outside) * real(0.5)
    };
    Ok(TongueInterval { lo: lower, hi: upper, seed })
}
