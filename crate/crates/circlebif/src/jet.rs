//! Truncated trivariate Taylor arithmetic in (x, s, theta) up to total
//! degree 3.
//!
//! A [`Jet3`] stores the 20 coefficients of a degree-3 expansion around a
//! base point. Composition in the phase variable x (the parameters enter
//! both factors) is what lets us transport every partial derivative the
//! saddle-node and cusp conditions need through q-fold iteration of a
//! family member.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::FamilySpec;
use crate::scalar::{real, Scalar};

/// Total-degree cap of the expansion.
pub const JET_DEGREE: usize = 3;

/// The 20 monomial exponents (i, j, k) with i + j + k <= 3, for
/// dx^i ds^j dtheta^k.
pub const MONOMIALS: [(usize, usize, usize); 20] = [
    (0, 0, 0),
    (0, 0, 1),
    (0, 0, 2),
    (0, 0, 3),
    (0, 1, 0),
    (0, 1, 1),
    (0, 1, 2),
    (0, 2, 0),
    (0, 2, 1),
    (0, 3, 0),
    (1, 0, 0),
    (1, 0, 1),
    (1, 0, 2),
    (1, 1, 0),
    (1, 1, 1),
    (1, 2, 0),
    (2, 0, 0),
    (2, 0, 1),
    (2, 1, 0),
    (3, 0, 0),
];

/// Phase/parameter axis of the expansion, in base-point order (x, s, theta).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    S,
    Theta,
}

impl Var {
    fn index(self) -> usize {
        match self {
            Var::X => 0,
            Var::S => 1,
            Var::Theta => 2,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum JetError<S: Scalar> {
    #[error("jet base points differ: {a:?} vs {b:?}")]
    BasePointMismatch { a: [S; 3], b: [S; 3] },
    #[error("composition base mismatch: outer expands at {outer_base}, inner value is {inner_value}")]
    CompositionBaseMismatch { outer_base: S, inner_value: S },
}

/// Degree-3 Taylor expansion of a scalar function of (x, s, theta) around
/// `base`. `coeff[i][j][k]` multiplies `dx^i ds^j dtheta^k`; entries with
/// i + j + k > 3 are kept at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet3<S> {
    base: [S; 3],
    coeff: [[[S; 4]; 4]; 4],
}

impl<S: Scalar> Jet3<S> {
    pub fn constant(base: [S; 3], value: S) -> Self {
        let mut coeff = [[[S::zero(); 4]; 4]; 4];
        coeff[0][0][0] = value;
        Self { base, coeff }
    }

    /// Jet of the coordinate function `var` itself: value is the base
    /// component, first derivative 1 in that slot.
    pub fn coordinate(base: [S; 3], var: Var) -> Self {
        let mut jet = Self::constant(base, base[var.index()]);
        match var {
            Var::X => jet.coeff[1][0][0] = S::one(),
            Var::S => jet.coeff[0][1][0] = S::one(),
            Var::Theta => jet.coeff[0][0][1] = S::one(),
        }
        jet
    }

    /// Builds a jet from raw coefficients; entries above total degree 3 are
    /// zeroed.
    pub fn from_coefficients(base: [S; 3], mut coeff: [[[S; 4]; 4]; 4]) -> Self {
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    if i + j + k > JET_DEGREE {
                        coeff[i][j][k] = S::zero();
                    }
                }
            }
        }
        Self { base, coeff }
    }

    pub fn base(&self) -> [S; 3] {
        self.base
    }

    pub fn value(&self) -> S {
        self.coeff[0][0][0]
    }

    pub fn coefficient(&self, i: usize, j: usize, k: usize) -> S {
        self.coeff[i][j][k]
    }

    /// Partial derivative d^(i+j+k) / dx^i ds^j dtheta^k at the base point.
    pub fn partial(&self, i: usize, j: usize, k: usize) -> S {
        let factorial = |n: usize| -> f64 { (1..=n).map(|m| m as f64).product::<f64>().max(1.0) };
        self.coeff[i][j][k] * real(factorial(i) * factorial(j) * factorial(k))
    }

    pub fn dx(&self) -> S {
        self.coeff[1][0][0]
    }

    pub fn dxx(&self) -> S {
        self.coeff[2][0][0] * real(2.0)
    }

    pub fn dxxx(&self) -> S {
        self.coeff[3][0][0] * real(6.0)
    }

    pub fn ds(&self) -> S {
        self.coeff[0][1][0]
    }

    pub fn dtheta(&self) -> S {
        self.coeff[0][0][1]
    }

    pub fn dxs(&self) -> S {
        self.coeff[1][1][0]
    }

    pub fn dxtheta(&self) -> S {
        self.coeff[1][0][1]
    }

    pub fn is_finite(&self) -> bool {
        self.base.iter().all(|v| v.is_finite())
            && MONOMIALS
                .iter()
                .all(|&(i, j, k)| self.coeff[i][j][k].is_finite())
    }

    /// Largest absolute coefficient difference; bases must match.
    pub fn max_coeff_diff(&self, other: &Self) -> S {
        MONOMIALS.iter().fold(S::zero(), |acc, &(i, j, k)| {
            acc.max((self.coeff[i][j][k] - other.coeff[i][j][k]).abs())
        })
    }

    pub fn checked_add(&self, rhs: &Self) -> Result<Self, JetError<S>> {
        self.check_base(rhs)?;
        Ok(self.zip(rhs, |a, b| a + b))
    }

    pub fn checked_sub(&self, rhs: &Self) -> Result<Self, JetError<S>> {
        self.check_base(rhs)?;
        Ok(self.zip(rhs, |a, b| a - b))
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self, JetError<S>> {
        self.check_base(rhs)?;
        Ok(self.mul_impl(rhs))
    }

    fn check_base(&self, rhs: &Self) -> Result<(), JetError<S>> {
        if self.base != rhs.base {
            return Err(JetError::BasePointMismatch {
                a: self.base,
                b: rhs.base,
            });
        }
        Ok(())
    }

    fn zip(&self, rhs: &Self, f: impl Fn(S, S) -> S) -> Self {
        let mut out = Self::constant(self.base, S::zero());
        for &(i, j, k) in &MONOMIALS {
            out.coeff[i][j][k] = f(self.coeff[i][j][k], rhs.coeff[i][j][k]);
        }
        out
    }

    fn mul_impl(&self, rhs: &Self) -> Self {
        let mut out = Self::constant(self.base, S::zero());
        for &(i1, j1, k1) in &MONOMIALS {
            let a = self.coeff[i1][j1][k1];
            if a == S::zero() {
                continue;
            }
            for &(i2, j2, k2) in &MONOMIALS {
                if i1 + i2 + j1 + j2 + k1 + k2 <= JET_DEGREE {
                    let slot = &mut out.coeff[i1 + i2][j1 + j2][k1 + k2];
                    *slot = *slot + a * rhs.coeff[i2][j2][k2];
                }
            }
        }
        out
    }

    pub fn scaled(&self, f: S) -> Self {
        let mut out = self.clone();
        for &(i, j, k) in &MONOMIALS {
            out.coeff[i][j][k] = out.coeff[i][j][k] * f;
        }
        out
    }

    pub fn plus_constant(&self, c: S) -> Self {
        let mut out = self.clone();
        out.coeff[0][0][0] = out.coeff[0][0][0] + c;
        out
    }

    /// The non-constant part: same jet with the value coefficient zeroed.
    fn fluctuation(&self) -> Self {
        let mut out = self.clone();
        out.coeff[0][0][0] = S::zero();
        out
    }

    /// Multiplies by the monomial ds^j dtheta^k (an index shift; overflow
    /// beyond total degree 3 is truncated).
    fn shifted_param(&self, j: usize, k: usize) -> Self {
        let mut out = Self::constant(self.base, S::zero());
        for &(i1, j1, k1) in &MONOMIALS {
            if i1 + j1 + j + k1 + k <= JET_DEGREE {
                out.coeff[i1][j1 + j][k1 + k] = self.coeff[i1][j1][k1];
            }
        }
        out
    }

    fn add_assign_unchecked(&mut self, rhs: &Self) {
        for &(i, j, k) in &MONOMIALS {
            self.coeff[i][j][k] = self.coeff[i][j][k] + rhs.coeff[i][j][k];
        }
    }

    /// Applies a univariate analytic function given its value and first
    /// three derivatives at the jet's value.
    fn apply_series(&self, derivs: [S; 4]) -> Self {
        let u = self.fluctuation();
        let u2 = u.mul_impl(&u);
        let u3 = u2.mul_impl(&u);
        let mut out = Self::constant(self.base, derivs[0]);
        out.add_assign_unchecked(&u.scaled(derivs[1]));
        out.add_assign_unchecked(&u2.scaled(derivs[2] / real(2.0)));
        out.add_assign_unchecked(&u3.scaled(derivs[3] / real(6.0)));
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.apply_series([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.apply_series([c, -s, -c, s])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.apply_series([e, e, e, e])
    }

    pub(crate) fn with_value_shifted(mut self, dv: S) -> Self {
        self.coeff[0][0][0] = self.coeff[0][0][0] + dv;
        self
    }

    pub(crate) fn with_base_x(mut self, x: S) -> Self {
        self.base[0] = x;
        self
    }
}

impl<S: Scalar> std::ops::Add for &Jet3<S> {
    type Output = Jet3<S>;
    fn add(self, rhs: Self) -> Jet3<S> {
        debug_assert_eq!(self.base, rhs.base);
        self.zip(rhs, |a, b| a + b)
    }
}

impl<S: Scalar> std::ops::Sub for &Jet3<S> {
    type Output = Jet3<S>;
    fn sub(self, rhs: Self) -> Jet3<S> {
        debug_assert_eq!(self.base, rhs.base);
        self.zip(rhs, |a, b| a - b)
    }
}

impl<S: Scalar> std::ops::Mul for &Jet3<S> {
    type Output = Jet3<S>;
    fn mul(self, rhs: Self) -> Jet3<S> {
        debug_assert_eq!(self.base, rhs.base);
        self.mul_impl(rhs)
    }
}

/// Maximum phase-variable base mismatch tolerated by [`compose`]
/// (calibrated for f64; a mismatch is a hard error, never a silent
/// re-expansion).
pub const COMPOSE_BASE_TOL: f64 = 1e-12;

/// Degree-3 truncation of `(x, s, theta) -> outer(inner(x, s, theta), s,
/// theta)`. The parameters enter both factors, so parameter partials of the
/// result combine the outer map's explicit dependence with dependence
/// through the inner value. `outer` must expand at `(inner.value(), s0,
/// theta0)`.
pub fn compose<S: Scalar>(outer: &Jet3<S>, inner: &Jet3<S>) -> Result<Jet3<S>, JetError<S>> {
    if (outer.base[0] - inner.value()).abs() > real(COMPOSE_BASE_TOL)
        || outer.base[1] != inner.base[1]
        || outer.base[2] != inner.base[2]
    {
        return Err(JetError::CompositionBaseMismatch {
            outer_base: outer.base[0],
            inner_value: inner.value(),
        });
    }
    let u = inner.fluctuation();
    let u2 = u.mul_impl(&u);
    let u3 = u2.mul_impl(&u);
    let one = Jet3::constant(inner.base, S::one());
    let powers = [one, u, u2, u3];
    let mut out = Jet3::constant(inner.base, S::zero());
    for &(i, j, k) in &MONOMIALS {
        let c = outer.coeff[i][j][k];
        if c == S::zero() {
            continue;
        }
        if j == 0 && k == 0 {
            out.add_assign_unchecked(&powers[i].scaled(c));
        } else {
            out.add_assign_unchecked(&powers[i].shifted_param(j, k).scaled(c));
        }
    }
    Ok(out)
}

/// Jet of the lift of the q-th iterate of a family member, with the integer
/// winding split out so the value can be reduced to a fundamental strip
/// during iteration.
#[derive(Debug, Clone)]
pub struct IterateJet<S> {
    /// Jet of Lift(F^q) at (x0, s0, theta0); the value is the full lift.
    pub jet: Jet3<S>,
    /// Integer part accumulated over the q steps; `jet.value() - winding`
    /// lies in [0, 1).
    pub winding: i64,
    pub q: u32,
}

impl<S: Scalar> IterateJet<S> {
    /// H1 residual `Lift(F^q)(x) - x - p` for the given integer p.
    pub fn displacement(&self, p: i64) -> S {
        self.jet.value() - self.jet.base()[0] - real(p as f64)
    }
}

/// Transports the full degree-3 jet of the family lift through q
/// applications of the map. The phase value is reduced to [0, 1) after each
/// step (derivative coefficients are unchanged by the lift equivariance),
/// and the removed integer part is returned as the winding.
pub fn iterate_jet<S: Scalar>(family: &FamilySpec<S>, q: u32, s: S, theta: S, x: S) -> IterateJet<S> {
    assert!(q >= 1, "iterate count must be at least 1");
    let n0 = x.floor();
    let mut winding = n0.to_i64().expect("winding fits in i64");
    let mut jet = Jet3::coordinate([x - n0, s, theta], Var::X);
    for _ in 0..q {
        let step = family.step_jet([jet.value(), s, theta]);
        jet = compose(&step, &jet).expect("step jet expands at the current value");
        let n = jet.value().floor();
        if n != S::zero() {
            winding += n.to_i64().expect("winding fits in i64");
            jet = jet.with_value_shifted(-n);
        }
    }
    let total = real(winding as f64);
    IterateJet {
        jet: jet.with_value_shifted(total).with_base_x(x),
        winding,
        q,
    }
}
