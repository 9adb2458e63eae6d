//! Reduced rational rotation numbers, serialized as `"p/q"` strings.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::{real, Scalar};

/// A reduced fraction p/q with q >= 1. Construction normalizes the sign
/// into the numerator and divides out common factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<i64>);

impl Rational {
    pub fn new(p: i64, q: i64) -> Self {
        assert!(q != 0, "denominator must be nonzero");
        Rational(Ratio::new(p, q))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn to_scalar<S: Scalar>(&self) -> S {
        real::<S>(self.numer() as f64) / real::<S>(self.denom() as f64)
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot parse {0:?} as a rational p/q")]
pub struct ParseRationalError(String);

impl FromStr for Rational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseRationalError(s.to_string());
        match s.split_once('/') {
            Some((p, q)) => {
                let p: i64 = p.trim().parse().map_err(|_| bad())?;
                let q: i64 = q.trim().parse().map_err(|_| bad())?;
                if q == 0 {
                    return Err(bad());
                }
                Ok(Rational::new(p, q))
            }
            None => {
                let p: i64 = s.trim().parse().map_err(|_| bad())?;
                Ok(Rational::new(p, 1))
            }
        }
    }
}

impl Serialize for Rational {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Continued-fraction convergents of `value` with denominators up to
/// `q_max`, in order of increasing denominator.
pub fn convergents(value: f64, q_max: i64) -> Vec<Rational> {
    let mut out = Vec::new();
    if !value.is_finite() {
        return out;
    }
    let (mut h_prev, mut h) = (1i64, value.floor() as i64);
    let (mut k_prev, mut k) = (0i64, 1i64);
    out.push(Rational::new(h, k));
    let mut frac = value - value.floor();
    for _ in 0..40 {
        if frac.abs() < 1e-14 {
            break;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let a = a as i64;
        let (h_next, overflow1) = match a.checked_mul(h) {
            Some(v) => match v.checked_add(h_prev) {
                Some(v) => (v, false),
                None => (0, true),
            },
            None => (0, true),
        };
        let (k_next, overflow2) = match a.checked_mul(k) {
            Some(v) => match v.checked_add(k_prev) {
                Some(v) => (v, false),
                None => (0, true),
            },
            None => (0, true),
        };
        if overflow1 || overflow2 || k_next > q_max {
            break;
        }
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
        out.push(Rational::new(h, k));
    }
    out
}
