//! Parametric families of circle-diffeomorphism lifts.
//!
//! A family is an ordered list of stages, each a lift of a circle map
//! (rotation, Fourier perturbation, flow map, pointwise inverse, or a
//! two-family homotopy blend). Every stage satisfies Lift(x+1) = Lift(x)+1
//! by construction, so the composite does too. Each stage evaluates both as
//! a plain scalar (the fast path for orbit iteration) and as a [`Jet3`]
//! (the derivative transport path).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::{compose, Jet3, Var};
use crate::scalar::{count, linspace, real, Scalar};

#[derive(Debug, Error)]
pub enum FamilyError<S: Scalar> {
    #[error("degenerate construction: {0}")]
    DegenerateConstruction(String),
    #[error("not a diffeomorphism family: derivative {min_derivative} at s={s}, theta={theta}, x={x}")]
    NotDiffeomorphism { min_derivative: S, s: S, theta: S, x: S },
    #[error("theta ranges differ: {0:?} vs {1:?}")]
    ThetaRangeMismatch([S; 2], [S; 2]),
    #[error("conjugacy stage must be parameter-free")]
    NotParameterFree,
    #[error("invalid family description: {0}")]
    InvalidSpec(String),
}

/// A point of the parameter rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint<S> {
    pub s: S,
    pub theta: S,
}

impl<S: Scalar> ParamPoint<S> {
    pub fn new(s: S, theta: S) -> Self {
        Self { s, theta }
    }
}

/// Parameter rectangle `I_s x I_theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox<S> {
    pub s: [S; 2],
    pub theta: [S; 2],
}

impl<S: Scalar> ParamBox<S> {
    pub fn contains(&self, p: ParamPoint<S>) -> bool {
        p.s >= self.s[0] && p.s <= self.s[1] && p.theta >= self.theta[0] && p.theta <= self.theta[1]
    }

    pub fn contains_with_margin(&self, p: ParamPoint<S>, margin: S) -> bool {
        p.s >= self.s[0] - margin
            && p.s <= self.s[1] + margin
            && p.theta >= self.theta[0] - margin
            && p.theta <= self.theta[1] + margin
    }
}

/// Bivariate polynomial in the parameters: sum of `coef * s^i * theta^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly2<S> {
    pub terms: Vec<PolyTerm<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm<S> {
    pub i: u32,
    pub j: u32,
    pub coef: S,
}

impl<S: Scalar> Poly2<S> {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: S) -> Self {
        Self {
            terms: vec![PolyTerm { i: 0, j: 0, coef: c }],
        }
    }

    /// The monomial `theta`.
    pub fn theta() -> Self {
        Self {
            terms: vec![PolyTerm { i: 0, j: 1, coef: S::one() }],
        }
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Self {
            terms: vec![PolyTerm { i: 1, j: 0, coef: S::one() }],
        }
    }

    pub fn new(terms: &[(u32, u32, S)]) -> Self {
        Self {
            terms: terms
                .iter()
                .map(|&(i, j, coef)| PolyTerm { i, j, coef })
                .collect(),
        }
    }

    pub fn eval(&self, s: S, theta: S) -> S {
        self.terms.iter().fold(S::zero(), |acc, t| {
            acc + t.coef * s.powi(t.i as i32) * theta.powi(t.j as i32)
        })
    }

    pub fn is_parameter_free(&self) -> bool {
        self.terms.iter().all(|t| (t.i, t.j) == (0, 0))
    }

    /// Jet of the polynomial at the base parameters (x-independent).
    /// Coefficients come from the exact binomial re-expansion, so partials
    /// are correct even for terms of degree above the jet cap.
    pub fn jet(&self, base: [S; 3]) -> Jet3<S> {
        let (s0, t0) = (base[1], base[2]);
        let mut coeff = [[[S::zero(); 4]; 4]; 4];
        for term in &self.terms {
            let (i, j) = (term.i as usize, term.j as usize);
            for a in 0..=i.min(3) {
                for b in 0..=j.min(3 - a) {
                    let c = term.coef
                        * real::<S>(binomial(i, a))
                        * s0.powi((i - a) as i32)
                        * real::<S>(binomial(j, b))
                        * t0.powi((j - b) as i32);
                    coeff[0][a][b] = coeff[0][a][b] + c;
                }
            }
        }
        Jet3::from_coefficients(base, coeff)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for m in 0..k {
        out = out * (n - m) as f64 / (m + 1) as f64;
    }
    out
}

/// One Fourier mode `ampSin(s,theta) sin(2 pi k x) + ampCos(s,theta) cos(2 pi k x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FourierMode<S> {
    pub k: u32,
    pub amp_sin: Poly2<S>,
    pub amp_cos: Poly2<S>,
}

/// Trigonometric polynomial in x with parameter-dependent coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrigSeries<S> {
    pub offset_poly: Poly2<S>,
    pub modes: Vec<FourierMode<S>>,
}

impl<S: Scalar> TrigSeries<S> {
    pub fn eval(&self, s: S, theta: S, x: S) -> S {
        let tau = S::TAU();
        let mut sum = self.offset_poly.eval(s, theta);
        for mode in &self.modes {
            let (sn, cs) = (tau * count::<S>(mode.k as usize) * x).sin_cos();
            sum = sum + mode.amp_sin.eval(s, theta) * sn + mode.amp_cos.eval(s, theta) * cs;
        }
        sum
    }

    /// n-th derivative in x (n <= 3), for the inverse-stage recurrences.
    fn deriv_x(&self, s: S, theta: S, x: S, n: u32) -> S {
        let tau = S::TAU();
        let mut sum = if n == 0 {
            self.offset_poly.eval(s, theta)
        } else {
            S::zero()
        };
        for mode in &self.modes {
            let w = tau * count::<S>(mode.k as usize);
            let (sn, cs) = (w * x).sin_cos();
            let scale = w.powi(n as i32);
            // d^n sin = scale * sin(wx + n pi/2), same shift for cos.
            let (dsin, dcos) = match n % 4 {
                0 => (sn, cs),
                1 => (cs, -sn),
                2 => (-sn, -cs),
                _ => (-cs, sn),
            };
            sum = sum + scale * (mode.amp_sin.eval(s, theta) * dsin + mode.amp_cos.eval(s, theta) * dcos);
        }
        sum
    }

    /// Jet of the series evaluated on an arbitrary phase jet (the argument
    /// of each mode is `2 pi k X`, which carries parameter dependence when
    /// X does). When the phase jet is the bare coordinate the mode jets
    /// have closed-form coefficients, skipping the series composition.
    fn eval_jet(&self, x_jet: &Jet3<S>) -> Jet3<S> {
        let base = x_jet.base();
        let tau = S::TAU();
        let coordinate = *x_jet == Jet3::coordinate(base, Var::X);
        let mut sum = self.offset_poly.jet(base);
        for mode in &self.modes {
            let w = tau * count::<S>(mode.k as usize);
            let (sin_jet, cos_jet) = if coordinate {
                pure_phase_mode_jets(base, w)
            } else {
                let arg = x_jet.scaled(w);
                (arg.sin(), arg.cos())
            };
            if !is_zero_poly(&mode.amp_sin) {
                sum = &sum + &(&mode.amp_sin.jet(base) * &sin_jet);
            }
            if !is_zero_poly(&mode.amp_cos) {
                sum = &sum + &(&mode.amp_cos.jet(base) * &cos_jet);
            }
        }
        sum
    }

    pub fn is_parameter_free(&self) -> bool {
        self.offset_poly.is_parameter_free()
            && self
                .modes
                .iter()
                .all(|m| m.amp_sin.is_parameter_free() && m.amp_cos.is_parameter_free())
    }
}

fn is_zero_poly<S: Scalar>(p: &Poly2<S>) -> bool {
    p.terms.iter().all(|t| t.coef == S::zero())
}

/// Jets of sin(w x) and cos(w x) at the base point: derivatives in x only,
/// written directly from the chain rule.
fn pure_phase_mode_jets<S: Scalar>(base: [S; 3], w: S) -> (Jet3<S>, Jet3<S>) {
    let (sn, cs) = (w * base[0]).sin_cos();
    let half = real::<S>(0.5);
    let sixth = real::<S>(1.0 / 6.0);
    let w2 = w * w;
    let w3 = w2 * w;
    let mut sin_coeff = [[[S::zero(); 4]; 4]; 4];
    sin_coeff[0][0][0] = sn;
    sin_coeff[1][0][0] = w * cs;
    sin_coeff[2][0][0] = -w2 * sn * half;
    sin_coeff[3][0][0] = -w3 * cs * sixth;
    let mut cos_coeff = [[[S::zero(); 4]; 4]; 4];
    cos_coeff[0][0][0] = cs;
    cos_coeff[1][0][0] = -w * sn;
    cos_coeff[2][0][0] = -w2 * cs * half;
    cos_coeff[3][0][0] = w3 * sn * sixth;
    (
        Jet3::from_coefficients(base, sin_coeff),
        Jet3::from_coefficients(base, cos_coeff),
    )
}

/// One stage of a family lift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Stage<S> {
    /// `x + offsetPoly(s, theta)`.
    #[serde(rename_all = "camelCase")]
    Rotation { offset_poly: Poly2<S> },
    /// `x + offsetPoly + sum of Fourier modes`.
    #[serde(rename_all = "camelCase")]
    Fourier {
        #[serde(flatten)]
        series: TrigSeries<S>,
    },
    /// Time-delta map of `x' = field(x)`, integrated by fixed-step RK4.
    #[serde(rename_all = "camelCase")]
    Flow {
        field: TrigSeries<S>,
        delta: S,
        steps: u32,
    },
    /// Pointwise inverse of the parameter-free lift `x + of(x)`.
    #[serde(rename_all = "camelCase")]
    Inverse { of: TrigSeries<S> },
    /// Smoothstep blend in s between two stage lists (each a lift).
    #[serde(rename_all = "camelCase")]
    Homotopy { from: Vec<Stage<S>>, to: Vec<Stage<S>> },
}

/// The C^1 blend `3 s^2 - 2 s^3` used by homotopies.
fn smoothstep_poly<S: Scalar>() -> Poly2<S> {
    Poly2::new(&[(2, 0, real(3.0)), (3, 0, real(-2.0))])
}

impl<S: Scalar> Stage<S> {
    fn value(&self, s: S, theta: S, x: S) -> S {
        match self {
            Stage::Rotation { offset_poly } => x + offset_poly.eval(s, theta),
            Stage::Fourier { series } => x + series.eval(s, theta, x),
            Stage::Flow { field, delta, steps } => {
                let h = *delta / count::<S>((*steps).max(1) as usize);
                let half = h / real(2.0);
                let sixth = h / real(6.0);
                let mut y = x;
                for _ in 0..(*steps).max(1) {
                    let k1 = field.eval(s, theta, y);
                    let k2 = field.eval(s, theta, y + half * k1);
                    let k3 = field.eval(s, theta, y + half * k2);
                    let k4 = field.eval(s, theta, y + h * k3);
                    y = y + sixth * (k1 + (k2 + k3) * real(2.0) + k4);
                }
                y
            }
            Stage::Inverse { of } => invert_lift(of, s, theta, x),
            Stage::Homotopy { from, to } => {
                let sigma = smoothstep_poly::<S>().eval(s, theta);
                let l0 = stages_value(from, s, theta, x);
                let l1 = stages_value(to, s, theta, x);
                x + (S::one() - sigma) * (l0 - x) + sigma * (l1 - x)
            }
        }
    }

    /// Jet of the stage lift at `base`.
    fn jet(&self, base: [S; 3]) -> Jet3<S> {
        let x_jet = Jet3::coordinate(base, Var::X);
        match self {
            Stage::Rotation { offset_poly } => &x_jet + &offset_poly.jet(base),
            Stage::Fourier { series } => &x_jet + &series.eval_jet(&x_jet),
            Stage::Flow { field, delta, steps } => {
                let h = *delta / count::<S>((*steps).max(1) as usize);
                let half = h / real(2.0);
                let sixth = h / real(6.0);
                let mut y = x_jet;
                for _ in 0..(*steps).max(1) {
                    let k1 = field.eval_jet(&y);
                    let k2 = field.eval_jet(&(&y + &k1.scaled(half)));
                    let k3 = field.eval_jet(&(&y + &k2.scaled(half)));
                    let k4 = field.eval_jet(&(&y + &k3.scaled(h)));
                    let incr = &(&k1 + &k4) + &(&k2 + &k3).scaled(real(2.0));
                    y = &y + &incr.scaled(sixth);
                }
                y
            }
            Stage::Inverse { of } => inverse_jet(of, base),
            Stage::Homotopy { from, to } => {
                let sigma = smoothstep_poly::<S>().jet(base);
                let one = Jet3::constant(base, S::one());
                let j0 = &stages_jet(from, base) - &x_jet;
                let j1 = &stages_jet(to, base) - &x_jet;
                let blended = &(&(&one - &sigma) * &j0) + &(&sigma * &j1);
                &x_jet + &blended
            }
        }
    }

    fn structural_check(&self) -> Result<(), String> {
        let check_poly = |p: &Poly2<S>| -> Result<(), String> {
            for t in &p.terms {
                if !t.coef.is_finite() {
                    return Err("non-finite polynomial coefficient".into());
                }
            }
            Ok(())
        };
        let check_series = |s: &TrigSeries<S>| -> Result<(), String> {
            check_poly(&s.offset_poly)?;
            for m in &s.modes {
                if m.k == 0 {
                    return Err("Fourier mode index k must be at least 1".into());
                }
                check_poly(&m.amp_sin)?;
                check_poly(&m.amp_cos)?;
            }
            Ok(())
        };
        match self {
            Stage::Rotation { offset_poly } => check_poly(offset_poly),
            Stage::Fourier { series } => check_series(series),
            Stage::Flow { field, delta, steps } => {
                if !delta.is_finite() {
                    return Err("non-finite flow time".into());
                }
                if *steps == 0 {
                    return Err("flow integration needs at least one step".into());
                }
                check_series(field)
            }
            Stage::Inverse { of } => {
                if !of.is_parameter_free() {
                    return Err("inverse stage must be parameter-free".into());
                }
                check_series(of)
            }
            Stage::Homotopy { from, to } => {
                for st in from.iter().chain(to.iter()) {
                    st.structural_check()?;
                }
                Ok(())
            }
        }
    }
}

fn stages_value<S: Scalar>(stages: &[Stage<S>], s: S, theta: S, x: S) -> S {
    stages.iter().fold(x, |y, st| st.value(s, theta, y))
}

fn stages_jet<S: Scalar>(stages: &[Stage<S>], base: [S; 3]) -> Jet3<S> {
    let mut jet = Jet3::coordinate(base, Var::X);
    for st in stages {
        let step = st.jet([jet.value(), base[1], base[2]]);
        jet = compose(&step, &jet).expect("stage jet expands at the running value");
    }
    jet
}

/// Solves `w + of(w) = x` for w by bracketing plus bisection, polished by
/// Newton to 1e-13.
fn invert_lift<S: Scalar>(of: &TrigSeries<S>, s: S, theta: S, x: S) -> S {
    let h = |w: S| w + of.eval(s, theta, w);
    let d0 = h(x) - x;
    let mut a = x - d0 - S::one();
    let mut b = x - d0 + S::one();
    while h(a) > x {
        a = a - S::one();
    }
    while h(b) < x {
        b = b + S::one();
    }
    for _ in 0..80 {
        let mid = (a + b) * real(0.5);
        if h(mid) > x {
            b = mid;
        } else {
            a = mid;
        }
        if b - a < real(1e-15) {
            break;
        }
    }
    let mut w = (a + b) * real(0.5);
    for _ in 0..6 {
        let r = h(w) - x;
        let dp = S::one() + of.deriv_x(s, theta, w, 1);
        if dp <= S::zero() {
            break;
        }
        let step = r / dp;
        w = w - step;
        if step.abs() < real(1e-15) {
            break;
        }
    }
    w
}

/// Jet of the inverse lift via the inverse-function-theorem recurrences up
/// to order 3. The inverse of a parameter-free lift carries no parameter
/// dependence, so the result is a pure-x jet composed into the chain by the
/// caller.
fn inverse_jet<S: Scalar>(of: &TrigSeries<S>, base: [S; 3]) -> Jet3<S> {
    let (s, theta, z) = (base[1], base[2], base[0]);
    let w = invert_lift(of, s, theta, z);
    let h1 = S::one() + of.deriv_x(s, theta, w, 1);
    let h2 = of.deriv_x(s, theta, w, 2);
    let h3 = of.deriv_x(s, theta, w, 3);
    let g1 = S::one() / h1;
    let g2 = -h2 / h1.powi(3);
    let g3 = (real::<S>(3.0) * h2 * h2 - h1 * h3) / h1.powi(5);
    let mut coeff = [[[S::zero(); 4]; 4]; 4];
    coeff[0][0][0] = w;
    coeff[1][0][0] = g1;
    coeff[2][0][0] = g2 / real(2.0);
    coeff[3][0][0] = g3 / real(6.0);
    Jet3::from_coefficients(base, coeff)
}

/// Declarative family of circle-diffeomorphism lifts over `(s, theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilySpec<S> {
    pub param_box: ParamBox<S>,
    pub monotone_in_theta: bool,
    pub stages: Vec<Stage<S>>,
}

impl<S: Scalar> FamilySpec<S> {
    /// Value of the composed lift at (s, theta, x).
    pub fn lift_value(&self, s: S, theta: S, x: S) -> S {
        stages_value(&self.stages, s, theta, x)
    }

    /// Jet of the composed lift at the base point (x, s, theta).
    pub fn step_jet(&self, base: [S; 3]) -> Jet3<S> {
        stages_jet(&self.stages, base)
    }

    /// Applies the lift with the phase reduced to [0, 1); returns the new
    /// reduced phase and the integer winding shed along the way.
    pub fn step_reduced(&self, s: S, theta: S, x: S) -> (S, i64) {
        let y = self.lift_value(s, theta, x);
        let n = y.floor();
        (y - n, n.to_i64().expect("winding fits in i64"))
    }

    /// Cheap shape validation: finite coefficients, positive mode indices,
    /// nonzero integration steps, an ordered parameter box.
    pub fn structural_check(&self) -> Result<(), FamilyError<S>> {
        let b = &self.param_box;
        let ordered = b.s[0].is_finite()
            && b.s[1].is_finite()
            && b.theta[0].is_finite()
            && b.theta[1].is_finite()
            && b.s[0] <= b.s[1]
            && b.theta[0] <= b.theta[1];
        if !ordered {
            return Err(FamilyError::InvalidSpec("parameter box is not an ordered finite rectangle".into()));
        }
        for st in &self.stages {
            st.structural_check().map_err(FamilyError::InvalidSpec)?;
        }
        Ok(())
    }

    pub fn rigid_rotation(alpha: f64) -> Self {
        Self {
            param_box: ParamBox {
                s: [S::zero(), S::one()],
                theta: [-S::one(), S::one()],
            },
            monotone_in_theta: false,
            stages: vec![Stage::Rotation {
                offset_poly: Poly2::constant(real(alpha)),
            }],
        }
    }

    /// The rotation family `x + theta`.
    pub fn rigid_rotation_theta() -> Self {
        Self {
            param_box: ParamBox {
                s: [S::zero(), S::one()],
                theta: [-S::one(), S::one()],
            },
            monotone_in_theta: true,
            stages: vec![Stage::Rotation {
                offset_poly: Poly2::theta(),
            }],
        }
    }

    /// The standard two-parameter family `x + theta + (s / 2 pi) sin(2 pi x)`.
    pub fn arnold_standard(s_range: [f64; 2]) -> Self {
        let inv_tau = 1.0 / std::f64::consts::TAU;
        Self {
            param_box: ParamBox {
                s: [real(s_range[0]), real(s_range[1])],
                theta: [-S::one(), S::one()],
            },
            monotone_in_theta: true,
            stages: vec![Stage::Fourier {
                series: TrigSeries {
                    offset_poly: Poly2::theta(),
                    modes: vec![FourierMode {
                        k: 1,
                        amp_sin: Poly2::new(&[(1, 0, real(inv_tau))]),
                        amp_cos: Poly2::zero(),
                    }],
                },
            }],
        }
    }

    /// One-parameter slice of the standard family at fixed coupling.
    pub fn arnold_slice(s: f64) -> Self {
        let amp = s / std::f64::consts::TAU;
        Self {
            param_box: ParamBox {
                s: [S::zero(), S::one()],
                theta: [-S::one(), S::one()],
            },
            monotone_in_theta: true,
            stages: vec![Stage::Fourier {
                series: TrigSeries {
                    offset_poly: Poly2::theta(),
                    modes: vec![FourierMode {
                        k: 1,
                        amp_sin: Poly2::constant(real(amp)),
                        amp_cos: Poly2::zero(),
                    }],
                },
            }],
        }
    }

    /// Two-mode family `x + theta + s sin(2 pi x) + 0.1 sin(4 pi x)` whose
    /// fixed-point fold locus carries a cusp at (0.2, 0, 0.5).
    pub fn cusp_demo() -> Self {
        Self {
            param_box: ParamBox {
                s: [S::zero(), real(0.5)],
                theta: [real(-0.2), real(0.2)],
            },
            monotone_in_theta: true,
            stages: vec![Stage::Fourier {
                series: TrigSeries {
                    offset_poly: Poly2::theta(),
                    modes: vec![
                        FourierMode {
                            k: 1,
                            amp_sin: Poly2::s(),
                            amp_cos: Poly2::zero(),
                        },
                        FourierMode {
                            k: 2,
                            amp_sin: Poly2::constant(real(0.1)),
                            amp_cos: Poly2::zero(),
                        },
                    ],
                },
            }],
        }
    }

    /// Three-term family `x + theta + s sin(2 pi x) + 0.02 sin(4 pi x) +
    /// 0.015 cos(2 pi x)` whose fold curves self-intersect in the parameter
    /// plane.
    pub fn intersection_demo() -> Self {
        Self {
            param_box: ParamBox {
                s: [S::zero(), real(0.5)],
                theta: [real(-0.2), real(0.2)],
            },
            monotone_in_theta: true,
            stages: vec![Stage::Fourier {
                series: TrigSeries {
                    offset_poly: Poly2::theta(),
                    modes: vec![
                        FourierMode {
                            k: 1,
                            amp_sin: Poly2::s(),
                            amp_cos: Poly2::new(&[(0, 0, real(0.015))]),
                        },
                        FourierMode {
                            k: 2,
                            amp_sin: Poly2::constant(real(0.02)),
                            amp_cos: Poly2::zero(),
                        },
                    ],
                },
            }],
        }
    }
}

/// Report of a grid check that the composed lift has positive x-derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport<S> {
    pub min_derivative: S,
    pub ok: bool,
    pub worst: ParamPoint<S>,
    pub worst_x: S,
}

/// Minimum of the lift's x-derivative over a
/// `grid_params x grid_params x grid_x` verification grid; `ok` iff the
/// minimum is positive.
pub fn validate_diffeo<S: Scalar>(
    spec: &FamilySpec<S>,
    grid_x: usize,
    grid_params: usize,
) -> ValidationReport<S> {
    let grid_x = grid_x.max(2);
    let grid_params = grid_params.max(2);
    let s_grid = linspace(spec.param_box.s[0], spec.param_box.s[1], grid_params);
    let t_grid = linspace(spec.param_box.theta[0], spec.param_box.theta[1], grid_params);
    let mut min = S::infinity();
    let mut worst = (ParamPoint::new(s_grid[0], t_grid[0]), S::zero());
    for &s in &s_grid {
        for &t in &t_grid {
            for ix in 0..grid_x {
                let x = count::<S>(ix) / count::<S>(grid_x);
                let d = spec.step_jet([x, s, t]).dx();
                if d < min {
                    min = d;
                    worst = (ParamPoint::new(s, t), x);
                }
            }
        }
    }
    ValidationReport {
        min_derivative: min,
        ok: min > S::zero(),
        worst: worst.0,
        worst_x: worst.1,
    }
}

/// Grid check that the lift's theta-derivative is positive on a slice
/// (central differences; the jet path is not needed for a sign check).
pub fn verify_monotone_theta<S: Scalar>(spec: &FamilySpec<S>, s: S, grid_theta: usize, grid_x: usize) -> bool {
    let h = real::<S>(1e-6);
    let t_grid = linspace(spec.param_box.theta[0] + h, spec.param_box.theta[1] - h, grid_theta.max(2));
    for &t in &t_grid {
        for ix in 0..grid_x.max(2) {
            let x = count::<S>(ix) / count::<S>(grid_x);
            let d = (spec.lift_value(s, t + h, x) - spec.lift_value(s, t - h, x)) / (h + h);
            if !(d > S::zero()) {
                return false;
            }
        }
    }
    true
}

/// Parameters of the rotation-plus-flow construction that yields a map of
/// rotation number p/q with exactly 2N hyperbolic periodic orbits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Lemma1Params<S> {
    pub p: i64,
    pub q: u32,
    pub n: u32,
    pub delta: S,
    pub amplitude: S,
    /// RK4 substeps for the flow map.
    pub steps: u32,
}

impl<S: Scalar> Lemma1Params<S> {
    pub fn new(p: i64, q: u32, n: u32, delta: S, amplitude: S) -> Self {
        Self { p, q, n, delta, amplitude, steps: 64 }
    }
}

/// Builds the two-stage family: the time-delta map of `x' = A sin(2 pi q N x)`
/// followed by the rotation by p/q. The field has period 1/(qN), hence is
/// invariant under the rotation, and contributes N sinks and N sources per
/// fundamental domain; the composite has rotation number p/q and exactly 2N
/// hyperbolic periodic orbits.
pub fn build_lemma1_family<S: Scalar>(params: Lemma1Params<S>) -> Result<FamilySpec<S>, FamilyError<S>> {
    if params.q == 0 || params.n == 0 {
        return Err(FamilyError::InvalidSpec("q and N must be at least 1".into()));
    }
    if num_integer::gcd(params.p.unsigned_abs(), params.q as u64) != 1 {
        return Err(FamilyError::InvalidSpec(format!(
            "{}/{} is not reduced",
            params.p, params.q
        )));
    }
    if params.delta == S::zero() || params.amplitude == S::zero() {
        return Err(FamilyError::DegenerateConstruction(
            "a zero flow time or amplitude yields a rigid rotation with non-isolated periodic points".into(),
        ));
    }
    if !(params.delta > S::zero()) || !(params.amplitude > S::zero()) {
        return Err(FamilyError::InvalidSpec("flow time and amplitude must be positive".into()));
    }
    let wave = params.q * params.n;
    let spec = FamilySpec {
        param_box: ParamBox {
            s: [S::zero(), S::one()],
            theta: [-S::one(), S::one()],
        },
        monotone_in_theta: false,
        stages: vec![
            Stage::Flow {
                field: TrigSeries {
                    offset_poly: Poly2::zero(),
                    modes: vec![FourierMode {
                        k: wave,
                        amp_sin: Poly2::constant(params.amplitude),
                        amp_cos: Poly2::zero(),
                    }],
                },
                delta: params.delta,
                steps: params.steps.max(1),
            },
            Stage::Rotation {
                offset_poly: Poly2::constant(real(params.p as f64 / params.q as f64)),
            },
        ],
    };
    let report = validate_diffeo(&spec, 256, 2);
    if !report.ok {
        return Err(FamilyError::NotDiffeomorphism {
            min_derivative: report.min_derivative,
            s: report.worst.s,
            theta: report.worst.theta,
            x: report.worst_x,
        });
    }
    Ok(spec)
}

/// Appends the rotation by theta, turning a fixed lift into the
/// one-parameter family `x -> theta + lift(x)`.
pub fn embed_theta<S: Scalar>(spec: &FamilySpec<S>) -> FamilySpec<S> {
    let mut stages = spec.stages.clone();
    stages.push(Stage::Rotation { offset_poly: Poly2::theta() });
    FamilySpec {
        param_box: spec.param_box,
        monotone_in_theta: true,
        stages,
    }
}

/// Connects two theta-families by the smoothstep homotopy in s. The result
/// is re-validated as a diffeomorphism family.
pub fn build_homotopy<S: Scalar>(
    f0: &FamilySpec<S>,
    f1: &FamilySpec<S>,
) -> Result<FamilySpec<S>, FamilyError<S>> {
    if f0.param_box.theta != f1.param_box.theta {
        return Err(FamilyError::ThetaRangeMismatch(f0.param_box.theta, f1.param_box.theta));
    }
    let spec = FamilySpec {
        param_box: ParamBox {
            s: [S::zero(), S::one()],
            theta: f0.param_box.theta,
        },
        monotone_in_theta: f0.monotone_in_theta && f1.monotone_in_theta,
        stages: vec![Stage::Homotopy {
            from: f0.stages.clone(),
            to: f1.stages.clone(),
        }],
    };
    let report = validate_diffeo(&spec, 256, 16);
    if !report.ok {
        return Err(FamilyError::NotDiffeomorphism {
            min_derivative: report.min_derivative,
            s: report.worst.s,
            theta: report.worst.theta,
            x: report.worst_x,
        });
    }
    Ok(spec)
}

/// Conjugates every family member by the parameter-free lift
/// `h(x) = x + h_series(x)`: the result evaluates `h^-1 . f . h`.
pub fn conjugate_family<S: Scalar>(
    spec: &FamilySpec<S>,
    h: &TrigSeries<S>,
) -> Result<FamilySpec<S>, FamilyError<S>> {
    if !h.is_parameter_free() {
        return Err(FamilyError::NotParameterFree);
    }
    let grid = 4096;
    let mut min = S::infinity();
    let mut worst_x = S::zero();
    for ix in 0..grid {
        let x = count::<S>(ix) / count::<S>(grid);
        let d = S::one() + h.deriv_x(S::zero(), S::zero(), x, 1);
        if d < min {
            min = d;
            worst_x = x;
        }
    }
    if !(min > S::zero()) {
        return Err(FamilyError::NotDiffeomorphism {
            min_derivative: min,
            s: S::zero(),
            theta: S::zero(),
            x: worst_x,
        });
    }
    let mut stages = Vec::with_capacity(spec.stages.len() + 2);
    stages.push(Stage::Fourier { series: h.clone() });
    stages.extend(spec.stages.iter().cloned());
    stages.push(Stage::Inverse { of: h.clone() });
    Ok(FamilySpec {
        param_box: spec.param_box,
        monotone_in_theta: spec.monotone_in_theta,
        stages,
    })
}

/// A one-parameter view of a family at a fixed coupling value.
#[derive(Clone, Copy)]
pub struct ThetaSlice<'a, S> {
    pub family: &'a FamilySpec<S>,
    pub s: S,
}

impl<'a, S: Scalar> ThetaSlice<'a, S> {
    pub fn new(family: &'a FamilySpec<S>, s: S) -> Self {
        Self { family, s }
    }
}
