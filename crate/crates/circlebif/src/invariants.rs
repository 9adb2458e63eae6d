//! The source-count invariant: for a one-parameter family and a rational
//! rotation number, `a` is the maximal number of topological source orbits
//! that coexist at a parameter attaining that rotation number, and
//! `b = a mod 2` its parity. The parity sequence over an enumeration of
//! rationals separates families up to weak topological equivalence; the
//! section scan verifies that `a` changes by unit increments along a
//! homotopy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::census::{run_census, CensusError};
use crate::family::{FamilySpec, ParamPoint, ThetaSlice};
use crate::rational::Rational;
use crate::rotation::{tongue_interval, RotationError, TongueInterval};
use crate::scalar::{count, linspace, real, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum InvariantError<S: Scalar> {
    #[error("rotation number {0} is not attained")]
    RationalNotAttained(Rational),
    #[error("slice at s={0} is not verified monotone in theta")]
    MonotonicityUnverified(S),
    #[error("non-generic family: non-isolated periodic orbits at s={s}, theta={theta}")]
    NonGenericFamily { s: S, theta: S },
    #[error("census failed at s={s}, theta={theta}: {message}")]
    CensusFailed { s: S, theta: S, message: String },
}

/// The counting invariant at one rational: `a` is the sampled maximum of
/// coexisting topological source orbits over the located tongue, `b` its
/// parity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParityRecord<S> {
    pub pq: Rational,
    pub a: usize,
    pub b: u8,
    pub tongue_intervals: Vec<[S; 2]>,
    pub samples: usize,
}

/// a(s) along the homotopy parameter, with absent entries where the
/// rotation number is not attained on the slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionScan<S> {
    pub pq: Rational,
    pub s_grid: Vec<S>,
    pub a_of_s: Vec<Option<usize>>,
    pub unit_increments_ok: bool,
}

/// Endpoint-width tolerance used when locating tongues for the invariant.
const TONGUE_TOL: f64 = 1e-7;

fn lift_rotation_err<S: Scalar>(e: RotationError<S>) -> InvariantError<S> {
    match e {
        RotationError::RationalNotAttained(pq) => InvariantError::RationalNotAttained(pq),
        RotationError::MonotonicityUnverified(s) => InvariantError::MonotonicityUnverified(s),
    }
}

/// Maximal number of coexisting topological source orbits over parameters
/// attaining `pq` on the slice: the tongue is located first, then censused
/// at `theta_samples` interior points plus the endpoints and the detection
/// seed.
pub fn max_sources_at_rational<S: Scalar>(
    slice: ThetaSlice<'_, S>,
    pq: Rational,
    theta_samples: usize,
) -> Result<ParityRecord<S>, InvariantError<S>> {
    let tongue = tongue_interval(slice, pq, real(TONGUE_TOL)).map_err(lift_rotation_err)?;
    census_tongue(slice, pq, &tongue, theta_samples)
}

fn census_tongue<S: Scalar>(
    slice: ThetaSlice<'_, S>,
    pq: Rational,
    tongue: &TongueInterval<S>,
    theta_samples: usize,
) -> Result<ParityRecord<S>, InvariantError<S>> {
    let q = pq.denom() as usize;
    let grid_m = 4096 * q;
    let mut thetas: Vec<S> = vec![tongue.seed, tongue.lo, tongue.hi];
    let n = theta_samples.max(1);
    let width = tongue.width();
    for i in 1..=n {
        thetas.push(tongue.lo + width * count::<S>(i) / count::<S>(n + 1));
    }
    let counts: Vec<Result<usize, InvariantError<S>>> = thetas
        .par_iter()
        .map(|&theta| {
            let at = ParamPoint::new(slice.s, theta);
            match run_census(slice.family, at, pq, grid_m) {
                Ok(census) => Ok(census.sources_topological),
                Err(CensusError::NonIsolatedOrbits) => Err(InvariantError::NonGenericFamily {
                    s: slice.s,
                    theta,
                }),
                Err(e) => Err(InvariantError::CensusFailed {
                    s: slice.s,
                    theta,
                    message: e.to_string(),
                }),
            }
        })
        .collect();
    let mut a = 0;
    for c in counts {
        a = a.max(c?);
    }
    Ok(ParityRecord {
        pq,
        a,
        b: (a % 2) as u8,
        tongue_intervals: vec![[tongue.lo, tongue.hi]],
        samples: thetas.len(),
    })
}

/// Outcome of comparing two parity prefixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParityDiff<S> {
    /// First index where the parities differ, if any.
    pub first_diff: Option<usize>,
    /// Indices skipped because either family does not attain the rational.
    pub skipped: Vec<usize>,
    pub records_a: Vec<Option<ParityRecord<S>>>,
    pub records_b: Vec<Option<ParityRecord<S>>>,
}

/// Compares the parity sequences of two one-parameter families over an
/// ordered list of rationals; stops at the first differing index.
pub fn parity_prefix_diff<S: Scalar>(
    slice_a: ThetaSlice<'_, S>,
    slice_b: ThetaSlice<'_, S>,
    pq_list: &[Rational],
    theta_samples: usize,
) -> Result<ParityDiff<S>, InvariantError<S>> {
    let mut out = ParityDiff {
        first_diff: None,
        skipped: Vec::new(),
        records_a: Vec::new(),
        records_b: Vec::new(),
    };
    for (idx, &pq) in pq_list.iter().enumerate() {
        let ra = attained(max_sources_at_rational(slice_a, pq, theta_samples))?;
        let rb = attained(max_sources_at_rational(slice_b, pq, theta_samples))?;
        if ra.is_none() || rb.is_none() {
            out.skipped.push(idx);
        }
        let differ = match (&ra, &rb) {
            (Some(a), Some(b)) => a.b != b.b,
            _ => false,
        };
        out.records_a.push(ra);
        out.records_b.push(rb);
        if differ {
            out.first_diff = Some(idx);
            break;
        }
    }
    Ok(out)
}

fn attained<S: Scalar>(
    r: Result<ParityRecord<S>, InvariantError<S>>,
) -> Result<Option<ParityRecord<S>>, InvariantError<S>> {
    match r {
        Ok(rec) => Ok(Some(rec)),
        Err(InvariantError::RationalNotAttained(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Computes a(s) on `s_steps` horizontal sections of a two-parameter
/// family and checks that consecutive present values differ by at most 1.
/// A violated interval is bisected up to 3 times before the failure is
/// reported.
pub fn section_scan<S: Scalar>(
    spec: &FamilySpec<S>,
    pq: Rational,
    s_steps: usize,
    theta_samples: usize,
) -> Result<SectionScan<S>, InvariantError<S>> {
    let grid = linspace(spec.param_box.s[0], spec.param_box.s[1], s_steps.max(2));
    let eval = |s_values: &[S]| -> Result<Vec<(S, Option<usize>)>, InvariantError<S>> {
        s_values
            .par_iter()
            .map(|&s| {
                let slice = ThetaSlice::new(spec, s);
                let a = attained(max_sources_at_rational(slice, pq, theta_samples))?
                    .map(|rec| rec.a);
                Ok((s, a))
            })
            .collect()
    };
    let mut entries = eval(&grid)?;
    for _depth in 0..3 {
        let mut midpoints = Vec::new();
        for w in entries.windows(2) {
            if let ((s0, Some(a0)), (s1, Some(a1))) = (w[0], w[1]) {
                if a0.abs_diff(a1) > 1 {
                    midpoints.push((s0 + s1) * real(0.5));
                }
            }
        }
        if midpoints.is_empty() {
            break;
        }
        let refined = eval(&midpoints)?;
        entries.extend(refined);
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }
    let mut ok = true;
    for w in entries.windows(2) {
        if let ((_, Some(a0)), (_, Some(a1))) = (w[0], w[1]) {
            if a0.abs_diff(a1) > 1 {
                ok = false;
            }
        }
    }
    Ok(SectionScan {
        pq,
        s_grid: entries.iter().map(|e| e.0).collect(),
        a_of_s: entries.iter().map(|e| e.1).collect(),
        unit_increments_ok: ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{
        build_homotopy, build_lemma1_family, embed_theta, Lemma1Params, Poly2, Stage,
    };

    // One source throughout the zero-tongue interior; the semi-stable
    // endpoints contribute nothing.
    #[test]
    fn standard_slice_parity() {
        let spec = FamilySpec::<f64>::arnold_slice(0.5);
        let rec = max_sources_at_rational(ThetaSlice::new(&spec, 0.0), Rational::new(0, 1), 64)
            .unwrap();
        assert_eq!(rec.a, 1);
        assert_eq!(rec.b, 1);
        assert_eq!(rec.tongue_intervals.len(), 1);
        let [lo, hi] = rec.tongue_intervals[0];
        let expect = 0.5 / std::f64::consts::TAU;
        assert!((hi - expect).abs() < 1e-6 && (lo + expect).abs() < 1e-6);
    }

    // The construction with N = 3 yields three coexisting source orbits.
    #[test]
    fn lemma1_embedding_parity() {
        let lemma = build_lemma1_family(Lemma1Params::<f64>::new(0, 1, 3, 0.05, 1.0)).unwrap();
        let family = embed_theta(&lemma);
        let rec = max_sources_at_rational(ThetaSlice::new(&family, 0.0), Rational::new(0, 1), 64)
            .unwrap();
        assert_eq!(rec.a, 3);
        assert_eq!(rec.b, 1);
    }

    #[test]
    fn rigid_family_is_non_generic() {
        let spec = FamilySpec::<f64>::rigid_rotation_theta();
        let err = max_sources_at_rational(ThetaSlice::new(&spec, 0.0), Rational::new(1, 2), 64)
            .unwrap_err();
        assert!(matches!(err, InvariantError::NonGenericFamily { .. }));
    }

    #[test]
    fn identical_families_have_no_parity_diff() {
        let spec = FamilySpec::<f64>::arnold_slice(0.5);
        let diff = parity_prefix_diff(
            ThetaSlice::new(&spec, 0.0),
            ThetaSlice::new(&spec, 0.0),
            &[Rational::new(0, 1), Rational::new(1, 2)],
            64,
        )
        .unwrap();
        assert_eq!(diff.first_diff, None);
        assert!(diff.skipped.is_empty());
    }

    // a = 1 for the standard slice vs a = 2 for the N = 2 construction:
    // the parities differ already at index 0.
    #[test]
    fn parity_separates_constructed_family() {
        let arnold = FamilySpec::<f64>::arnold_slice(0.5);
        let lemma = build_lemma1_family(Lemma1Params::<f64>::new(0, 1, 2, 0.05, 1.0)).unwrap();
        let embedded = embed_theta(&lemma);
        let diff = parity_prefix_diff(
            ThetaSlice::new(&arnold, 0.0),
            ThetaSlice::new(&embedded, 0.0),
            &[Rational::new(0, 1), Rational::new(1, 2)],
            64,
        )
        .unwrap();
        assert_eq!(diff.first_diff, Some(0));
    }

    #[test]
    fn constant_homotopy_scan() {
        let f = FamilySpec::<f64>::arnold_slice(0.5);
        let hom = build_homotopy(&f, &f).unwrap();
        let scan = section_scan(&hom, Rational::new(0, 1), 32, 64).unwrap();
        assert!(scan.unit_increments_ok);
        assert!(scan.a_of_s.iter().all(|a| *a == Some(1)));
    }

    // Shift the target family's rotation offset so the tongue leaves the
    // narrow theta window along the homotopy: absent values are data, and
    // increments are checked only between present neighbours.
    #[test]
    fn scan_with_absent_sections() {
        let mut f0 = FamilySpec::<f64>::arnold_slice(0.5);
        f0.param_box.theta = [-0.05, 0.05];
        let mut f1 = f0.clone();
        if let Stage::Fourier { series } = &mut f1.stages[0] {
            series.offset_poly = Poly2::new(&[(0, 1, 1.0), (0, 0, 0.3)]);
        }
        let hom = build_homotopy(&f0, &f1).unwrap();
        let scan = section_scan(&hom, Rational::new(0, 1), 32, 64).unwrap();
        let present: Vec<bool> = scan.a_of_s.iter().map(|a| a.is_some()).collect();
        assert!(present[0], "tongue present at s = 0");
        assert!(!present[present.len() - 1], "tongue gone at s = 1");
        assert!(scan.unit_increments_ok);
    }
}
