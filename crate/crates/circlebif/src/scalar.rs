//! Scalar abstraction for the numeric core.
//!
//! All continuous math in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. Default tolerances throughout the crate
//! are calibrated for `f64`; callers instantiating `f32` must supply their
//! own.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` constant (tolerance, coefficient, grid bound) to `S`.
#[inline]
pub(crate) fn real<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("finite f64 constant")
}

/// Converts a `usize` count to `S`.
#[inline]
pub(crate) fn count<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("usize fits in scalar")
}

/// Inclusive evenly spaced grid with `n >= 2` points (a single repeated
/// point when `lo == hi`).
pub(crate) fn linspace<S: Scalar>(lo: S, hi: S, n: usize) -> Vec<S> {
    let n = n.max(2);
    let span = hi - lo;
    let denom = count::<S>(n - 1);
    (0..n).map(|i| lo + span * count::<S>(i) / denom).collect()
}
