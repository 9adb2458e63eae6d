//! Period-q orbit census: enumerates all zeros of the displacement
//! `G(x) = Lift(F^q)(x) - x - p` on the circle, groups them into orbits,
//! and classifies each orbit by multiplier or, near multiplier 1, by the
//! one-sided signs of G. The one-sided (topological) notion is the
//! authoritative source/sink classification; multipliers are the fast path
//! for the hyperbolic case.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{FamilySpec, ParamPoint};
use crate::jet::iterate_jet;
use crate::rational::Rational;
use crate::rotation::displacement_value;
use crate::scalar::{count, real, Scalar};

/// Multiplier distance from 1 below which an orbit is treated as
/// near-parabolic and classified by one-sided signs.
pub const HYP_TOL: f64 = 1e-8;
/// Newton target for refined zeros.
pub const NEWTON_TARGET: f64 = 1e-12;
/// Zeros closer than this are merged.
pub const DEDUPE_TOL: f64 = 1e-9;
/// Forward-iteration matching tolerance when grouping zeros into orbits.
pub const ORBIT_MATCH_TOL: f64 = 1e-7;
/// Whole-grid residual bound that signals a circle of periodic points.
pub const NON_ISOLATED_TOL: f64 = 1e-10;
/// One-sided classification probe offset.
pub const PROBE_OFFSET: f64 = 1e-5;
/// Grid local minima of |G| below this are investigated as candidate
/// even-multiplicity zeros.
pub const EVEN_ZERO_SCAN: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum CensusError<S: Scalar> {
    #[error("displacement below {NON_ISOLATED_TOL:e} on the whole grid: non-isolated periodic orbits")]
    NonIsolatedOrbits,
    #[error("census grid {got} is below the required {need} points")]
    GridTooCoarse { got: usize, need: usize },
    #[error("orbit matching failed: image {image} of zero {from} has no zero within {ORBIT_MATCH_TOL:e}")]
    OrbitMatching { from: S, image: S },
}

/// Stability classification of a periodic orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum OrbitKind {
    Source,
    Sink,
    ParabolicSource,
    ParabolicSink,
    ParabolicSemistable,
}

impl OrbitKind {
    pub fn is_topological_source(self) -> bool {
        matches!(self, OrbitKind::Source | OrbitKind::ParabolicSource)
    }

    pub fn is_topological_sink(self) -> bool {
        matches!(self, OrbitKind::Sink | OrbitKind::ParabolicSink)
    }

    pub fn is_hyperbolic(self) -> bool {
        matches!(self, OrbitKind::Source | OrbitKind::Sink)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PeriodicOrbit<S> {
    /// The q orbit points in [0, 1), ordered by forward iteration from the
    /// smallest.
    pub points: Vec<S>,
    /// Derivative of the lift of F^q along the orbit.
    pub multiplier: S,
    pub kind: OrbitKind,
    /// Largest |G| over the orbit points after refinement.
    pub residual: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OrbitCensus<S> {
    pub pq: Rational,
    pub orbits: Vec<PeriodicOrbit<S>>,
    pub sources_topological: usize,
    pub sinks_topological: usize,
    pub all_hyperbolic: bool,
    pub grid_used: usize,
}

impl<S: Scalar> OrbitCensus<S> {
    pub fn periodic_points(&self) -> usize {
        self.orbits.iter().map(|o| o.points.len()).sum()
    }
}

/// Number of orbits that repel on both sides; semi-stable saddle-nodes are
/// not sources and do not count.
pub fn count_topological_sources<S: Scalar>(census: &OrbitCensus<S>) -> usize {
    census
        .orbits
        .iter()
        .filter(|o| o.kind.is_topological_source())
        .count()
}

struct Zero<S> {
    x: S,
    residual: S,
}

/// Enumerates and classifies all period-q orbits at one parameter point.
///
/// Zeros of G are located by sign-change bracketing on `grid_m` points and
/// refined by safeguarded Newton; even-multiplicity zeros missed by
/// bracketing are additionally sought at grid local minima of |G|.
pub fn run_census<S: Scalar>(
    spec: &FamilySpec<S>,
    at: ParamPoint<S>,
    pq: Rational,
    grid_m: usize,
) -> Result<OrbitCensus<S>, CensusError<S>> {
    let q = pq.denom() as usize;
    let need = 1024 * q;
    if grid_m < need {
        return Err(CensusError::GridTooCoarse { got: grid_m, need });
    }
    let p = real::<S>(pq.numer() as f64);
    let g = |x: S| displacement_value(spec, at, q, p, x);

    let values: Vec<S> = (0..grid_m)
        .map(|i| g(count::<S>(i) / count::<S>(grid_m)))
        .collect();
    let sup = values.iter().fold(S::zero(), |m, v| m.max(v.abs()));
    if sup < real(NON_ISOLATED_TOL) {
        return Err(CensusError::NonIsolatedOrbits);
    }

    let h = S::one() / count::<S>(grid_m);
    let mut zeros: Vec<Zero<S>> = Vec::new();

    // Sign-change brackets, including the wrap-around pair.
    for i in 0..grid_m {
        let j = (i + 1) % grid_m;
        let (ga, gb) = (values[i], values[j]);
        if ga == S::zero() {
            zeros.push(Zero { x: count::<S>(i) * h, residual: S::zero() });
            continue;
        }
        if ga.signum() != gb.signum() && gb != S::zero() {
            let a = count::<S>(i) * h;
            let z = refine_bracketed_zero(&g, spec, at, q as u32, a, a + h, ga);
            zeros.push(z);
        }
    }

    // Even-multiplicity candidates: strict local minima of |G| below the
    // scan threshold with no sign change nearby.
    for i in 0..grid_m {
        let prev = values[(i + grid_m - 1) % grid_m];
        let here = values[i];
        let next = values[(i + 1) % grid_m];
        if here.abs() < real(EVEN_ZERO_SCAN)
            && here.abs() <= prev.abs()
            && here.abs() <= next.abs()
            && here.signum() == prev.signum()
            && here.signum() == next.signum()
            && here != S::zero()
        {
            let x = count::<S>(i) * h;
            if let Some(z) = refine_tangential_zero(&g, spec, at, q as u32, x, h) {
                zeros.push(z);
            }
        }
    }

    // Deduplicate on the circle.
    zeros.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    let mut deduped: Vec<Zero<S>> = Vec::new();
    for z in zeros {
        let dup = deduped
            .iter()
            .any(|w| circle_dist(w.x, z.x) < real(DEDUPE_TOL));
        if !dup {
            deduped.push(z);
        }
    }
    if deduped.len() > 1 {
        let first = deduped.first().unwrap().x;
        let last = deduped.last().unwrap().x;
        if circle_dist(first, last) < real(DEDUPE_TOL) {
            deduped.pop();
        }
    }

    // Group into orbits by forward iteration.
    let n_zeros = deduped.len();
    let mut visited = vec![false; n_zeros];
    let mut orbits = Vec::new();
    for start in 0..n_zeros {
        if visited[start] {
            continue;
        }
        let mut idx = start;
        let mut points = Vec::with_capacity(q);
        let mut residual = S::zero();
        for step in 0..q {
            visited[idx] = true;
            points.push(deduped[idx].x);
            residual = residual.max(deduped[idx].residual.abs());
            if step + 1 == q {
                break;
            }
            let (image, _) = spec.step_reduced(at.s, at.theta, deduped[idx].x);
            idx = match nearest_zero(&deduped, image) {
                Some((j, d)) if d < real(ORBIT_MATCH_TOL) && !visited[j] => j,
                _ => {
                    return Err(CensusError::OrbitMatching {
                        from: deduped[idx].x,
                        image,
                    })
                }
            };
        }
        let rep = points[0];
        let multiplier = iterate_jet(spec, q as u32, at.s, at.theta, rep).jet.dx();
        let kind = classify(&g, &deduped, rep, multiplier);
        orbits.push(PeriodicOrbit {
            points,
            multiplier,
            kind,
            residual,
        });
    }

    orbits.sort_by(|a, b| a.points[0].partial_cmp(&b.points[0]).unwrap());
    let sources_topological = orbits.iter().filter(|o| o.kind.is_topological_source()).count();
    let sinks_topological = orbits.iter().filter(|o| o.kind.is_topological_sink()).count();
    let all_hyperbolic = !orbits.is_empty() && orbits.iter().all(|o| o.kind.is_hyperbolic());
    Ok(OrbitCensus {
        pq,
        orbits,
        sources_topological,
        sinks_topological,
        all_hyperbolic,
        grid_used: grid_m,
    })
}

fn circle_dist<S: Scalar>(a: S, b: S) -> S {
    let d = (a - b).abs();
    let d = d - d.floor();
    d.min(S::one() - d)
}

fn nearest_zero<S: Scalar>(zeros: &[Zero<S>], x: S) -> Option<(usize, S)> {
    zeros
        .iter()
        .enumerate()
        .map(|(i, z)| (i, circle_dist(z.x, x)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
}

/// Newton with a bisection safeguard on a sign-change bracket.
fn refine_bracketed_zero<S: Scalar>(
    g: &impl Fn(S) -> S,
    spec: &FamilySpec<S>,
    at: ParamPoint<S>,
    q: u32,
    mut a: S,
    mut b: S,
    mut ga: S,
) -> Zero<S> {
    let target = real::<S>(NEWTON_TARGET);
    let mut x = (a + b) * real(0.5);
    let mut gx = g(x);
    for _ in 0..80 {
        if gx.abs() < target {
            break;
        }
        // Maintain the bracket.
        if gx.signum() == ga.signum() {
            a = x;
            ga = gx;
        } else {
            b = x;
        }
        let slope = iterate_jet(spec, q, at.s, at.theta, x).jet.dx() - S::one();
        let newton = if slope != S::zero() { x - gx / slope } else { x };
        x = if newton > a.min(b) && newton < a.max(b) {
            newton
        } else {
            (a + b) * real(0.5)
        };
        gx = g(x);
    }
    Zero { x: wrap_unit(x), residual: gx }
}

/// Bisection on G' around a grid local minimum of |G|; accepted as a zero
/// when the refined critical value sits at the non-isolated threshold.
fn refine_tangential_zero<S: Scalar>(
    g: &impl Fn(S) -> S,
    spec: &FamilySpec<S>,
    at: ParamPoint<S>,
    q: u32,
    x_hint: S,
    h: S,
) -> Option<Zero<S>> {
    let dg = |x: S| iterate_jet(spec, q, at.s, at.theta, x).jet.dx() - S::one();
    let (mut a, mut b) = (x_hint - h, x_hint + h);
    let mut fa = dg(a);
    if fa.signum() == dg(b).signum() {
        return None;
    }
    for _ in 0..60 {
        let mid = (a + b) * real(0.5);
        let fm = dg(mid);
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
        if b - a < real(1e-15) {
            break;
        }
    }
    let xc = (a + b) * real(0.5);
    let gc = g(xc);
    if gc.abs() <= real(NON_ISOLATED_TOL) {
        Some(Zero { x: wrap_unit(xc), residual: gc })
    } else {
        None
    }
}

fn wrap_unit<S: Scalar>(x: S) -> S {
    let w = x - x.floor();
    if w == S::one() {
        S::zero()
    } else {
        w
    }
}

/// Hyperbolic orbits classify by multiplier; near multiplier 1 the
/// one-sided signs of G decide: (-,+) repels, (+,-) attracts, equal signs
/// is the semi-stable saddle-node.
fn classify<S: Scalar>(g: &impl Fn(S) -> S, zeros: &[Zero<S>], rep: S, multiplier: S) -> OrbitKind {
    let hyp = real::<S>(HYP_TOL);
    if multiplier > S::one() + hyp {
        return OrbitKind::Source;
    }
    if multiplier < S::one() - hyp {
        return OrbitKind::Sink;
    }
    let mut probe = real::<S>(PROBE_OFFSET);
    for z in zeros {
        let d = circle_dist(z.x, rep);
        if d > real(DEDUPE_TOL) {
            probe = probe.min(d * real(0.5));
        }
    }
    let left = g(rep - probe).signum();
    let right = g(rep + probe).signum();
    if left < S::zero() && right > S::zero() {
        OrbitKind::ParabolicSource
    } else if left > S::zero() && right < S::zero() {
        OrbitKind::ParabolicSink
    } else {
        OrbitKind::ParabolicSemistable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{build_lemma1_family, conjugate_family, Lemma1Params, Poly2, TrigSeries};
    use crate::rotation::detect_rational;

    fn arnold() -> FamilySpec<f64> {
        FamilySpec::<f64>::arnold_standard([0.0, 1.0])
    }

    // Analytic fixed points of theta + (s/2pi) sin(2pi x) = 0 at theta=0:
    // x = 0 (multiplier 1 + s) and x = 1/2 (multiplier 1 - s).
    #[test]
    fn arnold_fixed_point_census() {
        let census = run_census(&arnold(), ParamPoint::new(0.5, 0.0), Rational::new(0, 1), 4096)
            .unwrap();
        assert_eq!(census.orbits.len(), 2);
        let source = &census.orbits[0];
        assert!(source.points[0].abs() < 1e-11 || (source.points[0] - 1.0).abs() < 1e-11);
        assert_eq!(source.kind, OrbitKind::Source);
        assert!((source.multiplier - 1.5).abs() < 1e-9);
        let sink = &census.orbits[1];
        assert!((sink.points[0] - 0.5).abs() < 1e-11);
        assert_eq!(sink.kind, OrbitKind::Sink);
        assert!((sink.multiplier - 0.5).abs() < 1e-9);
        assert!(census.all_hyperbolic);
        assert_eq!(census.sources_topological, 1);
        assert_eq!(census.sinks_topological, 1);
    }

    #[test]
    fn rigid_rational_rotation_is_non_isolated() {
        let spec = FamilySpec::<f64>::rigid_rotation(0.5);
        let err = run_census(&spec, ParamPoint::new(0.0, 0.0), Rational::new(1, 2), 8192)
            .unwrap_err();
        assert_eq!(err, CensusError::NonIsolatedOrbits);
    }

    // Dense-grid oracle: count sign changes of G on 2^16 points and compare
    // with the census orbit count.
    #[test]
    fn lemma1_half_rotation_census() {
        let spec = build_lemma1_family(Lemma1Params::<f64>::new(1, 2, 2, 0.05, 1.0)).unwrap();
        let at = ParamPoint::new(0.0, 0.0);
        let pq = Rational::new(1, 2);
        assert_eq!(detect_rational(&spec, at, 8, 1e-10), Some(pq));
        let census = run_census(&spec, at, pq, 8192).unwrap();
        assert_eq!(census.orbits.len(), 4);
        assert_eq!(census.periodic_points(), 8);
        assert_eq!(census.sources_topological, 2);
        assert_eq!(census.sinks_topological, 2);
        assert!(census.all_hyperbolic);

        let m = 1 << 16;
        let mut crossings = 0;
        let g = |x: f64| displacement_value(&spec, at, 2, 1.0, x);
        let mut prev = g(0.0);
        for i in 1..=m {
            let next = g(i as f64 / m as f64);
            if prev.signum() != next.signum() {
                crossings += 1;
            }
            prev = next;
        }
        assert_eq!(crossings / 2, census.orbits.len());
    }

    // At the tongue boundary theta = s/(2 pi) the single orbit is a
    // semi-stable saddle-node: same displacement sign on both sides.
    #[test]
    fn tongue_boundary_is_semistable() {
        let theta = 0.5 / std::f64::consts::TAU;
        let census = run_census(&arnold(), ParamPoint::new(0.5, theta), Rational::new(0, 1), 4096)
            .unwrap();
        assert_eq!(census.orbits.len(), 1);
        assert_eq!(census.orbits[0].kind, OrbitKind::ParabolicSemistable);
        assert!((census.orbits[0].points[0] - 0.75).abs() < 1e-6);
        assert_eq!(count_topological_sources(&census), 0);
        assert!(!census.all_hyperbolic);
    }

    #[test]
    fn source_counting_by_kind() {
        let mk = |kind| PeriodicOrbit {
            points: vec![0.0],
            multiplier: 1.0,
            kind,
            residual: 0.0,
        };
        let census = OrbitCensus {
            pq: Rational::new(0, 1),
            orbits: vec![
                mk(OrbitKind::Source),
                mk(OrbitKind::Sink),
                mk(OrbitKind::ParabolicSource),
                mk(OrbitKind::Sink),
            ],
            sources_topological: 2,
            sinks_topological: 2,
            all_hyperbolic: false,
            grid_used: 0,
        };
        assert_eq!(count_topological_sources(&census), 2);
    }

    #[test]
    fn grid_doubling_is_stable() {
        let spec = build_lemma1_family(Lemma1Params::<f64>::new(0, 1, 3, 0.05, 1.0)).unwrap();
        let at = ParamPoint::new(0.0, 0.0);
        let a = run_census(&spec, at, Rational::new(0, 1), 4096).unwrap();
        let b = run_census(&spec, at, Rational::new(0, 1), 8192).unwrap();
        assert_eq!(a.orbits.len(), b.orbits.len());
        assert_eq!(a.sources_topological, b.sources_topological);
    }

    #[test]
    fn grid_too_coarse_is_rejected() {
        let err = run_census(&arnold(), ParamPoint::new(0.5, 0.0), Rational::new(1, 2), 1024)
            .unwrap_err();
        assert!(matches!(err, CensusError::GridTooCoarse { .. }));
    }

    // Conjugation shifts orbit positions by h^{-1} and preserves
    // multipliers.
    #[test]
    fn census_invariant_under_conjugation() {
        let spec = arnold();
        let h = TrigSeries {
            offset_poly: Poly2::constant(0.3),
            modes: vec![],
        };
        let conj = conjugate_family(&spec, &h).unwrap();
        let at = ParamPoint::new(0.5, 0.02);
        let a = run_census(&spec, at, Rational::new(0, 1), 4096).unwrap();
        let b = run_census(&conj, at, Rational::new(0, 1), 4096).unwrap();
        assert_eq!(a.orbits.len(), b.orbits.len());
        for (oa, ob) in a.orbits.iter().zip(&b.orbits) {
            assert!((oa.multiplier - ob.multiplier).abs() < 1e-8);
            let shifted = wrap_unit(oa.points[0] - 0.3);
            assert!(circle_dist(shifted, ob.points[0]) < 1e-8);
        }
    }

    // Chain-rule consistency: the orbit multiplier equals the product of
    // single-step derivatives along the orbit, and agrees at every orbit
    // point.
    #[test]
    fn multiplier_chain_rule_consistency() {
        let spec = build_lemma1_family(Lemma1Params::<f64>::new(1, 3, 1, 0.05, 1.0)).unwrap();
        let at = ParamPoint::new(0.0, 0.0);
        let census = run_census(&spec, at, Rational::new(1, 3), 4096 * 3).unwrap();
        assert_eq!(census.orbits.len(), 2);
        for orbit in &census.orbits {
            let mut product = 1.0;
            for &x in &orbit.points {
                product *= spec.step_jet([x, 0.0, 0.0]).dx();
            }
            assert!((product - orbit.multiplier).abs() < 1e-9);
            for &x in &orbit.points {
                let m = iterate_jet(&spec, 3, 0.0, 0.0, x).jet.dx();
                assert!((m - orbit.multiplier).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn refined_zeros_meet_residual_bound() {
        let census = run_census(&arnold(), ParamPoint::new(0.8, 0.05), Rational::new(0, 1), 4096)
            .unwrap();
        for orbit in &census.orbits {
            assert!(orbit.residual < 1e-10);
        }
    }
}
