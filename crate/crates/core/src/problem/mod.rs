//! Problem data for a finite-dimensional mixed variational-hemivariational
//! inequality: find `(u, λ) ∈ V × Λ` with
//!
//! ```text
//! ⟨A(u), v − u⟩ + b(v − u, λ) + J⁰(γu; γv − γu) ≥ ⟨f, v − u⟩   for all v ∈ V
//! b(u, ρ − λ) ≤ 0                                              for all ρ ∈ Λ
//! ```
//!
//! with `V = Rⁿ`, `E = Rᵐ`, `X = Rᵏ`, all carrying the Euclidean norm.

mod schema;

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{project_polyhedron, spectral_norm, Matrix, Vector};
use crate::nonsmooth::PiecewiseC1Spec;

pub use schema::{instance_from_json, instance_to_json, load_instance, save_instance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceDims {
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

impl SpaceDims {
    pub fn new(n: usize, m: usize, k: usize) -> Result<Self> {
        if n == 0 || m == 0 || k == 0 {
            return Err(Error::Shape(format!("dimensions must be positive, got ({n}, {m}, {k})")));
        }
        Ok(Self { n, m, k })
    }
}

/// Componentwise `c·|uᵢ|^{p−2}·uᵢ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerTerm {
    pub p: f64,
    pub c: f64,
}

impl PowerTerm {
    fn value(&self, x: f64) -> f64 {
        self.c * x.abs().powf(self.p - 2.0) * x
    }

    fn slope(&self, x: f64) -> f64 {
        if self.p == 2.0 {
            self.c
        } else {
            self.c * (self.p - 1.0) * x.abs().powf(self.p - 2.0)
        }
    }
}

/// `A(u) = P u + power term`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    pub p: Matrix,
    pub power: Option<PowerTerm>,
    pub declared_m_a: f64,
}

impl OperatorSpec {
    pub fn linear(p: Matrix, declared_m_a: f64) -> Self {
        Self {
            p,
            power: None,
            declared_m_a,
        }
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn apply(&self, u: &Vector) -> Vector {
        let mut out = &self.p * u;
        if let Some(pw) = self.power {
            for (o, &x) in out.iter_mut().zip(u.iter()) {
                *o += pw.value(x);
            }
        }
        out
    }

    /// Jacobian `P + diag(c (p−1) |uᵢ|^{p−2})`.
    pub fn jacobian(&self, u: &Vector) -> Matrix {
        let mut jac = self.p.clone();
        if let Some(pw) = self.power {
            for i in 0..u.len() {
                jac[(i, i)] += pw.slope(u[i]);
            }
        }
        jac
    }

    /// Lipschitz bound of `A` on the ball of the given radius.
    pub fn lipschitz_on_ball(&self, radius: f64) -> f64 {
        let power = self.power.map_or(0.0, |pw| pw.slope(radius));
        spectral_norm(&self.p) + power
    }

    pub fn is_linear(&self) -> bool {
        self.power.is_none_or(|pw| pw.c == 0.0)
    }
}

pub fn apply_a(a: &OperatorSpec, u: &Vector) -> Vector {
    a.apply(u)
}

/// `b(v, ρ) = ρᵀ B v`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearFormSpec {
    pub b: Matrix,
}

impl BilinearFormSpec {
    pub fn eval(&self, v: &Vector, rho: &Vector) -> f64 {
        rho.dot(&(&self.b * v))
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.b)
    }

    pub fn is_zero(&self) -> bool {
        self.b.iter().all(|&x| x == 0.0)
    }
}

pub fn eval_b(b: &BilinearFormSpec, v: &Vector, rho: &Vector) -> f64 {
    b.eval(v, rho)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaSpec {
    g: Matrix,
    operator_norm: f64,
}

impl GammaSpec {
    pub fn new(g: Matrix) -> Self {
        let operator_norm = spectral_norm(&g);
        Self { g, operator_norm }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.g
    }

    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.g * v
    }

    pub fn adjoint(&self, xi: &Vector) -> Vector {
        self.g.tr_mul(xi)
    }
}

/// Closed convex multiplier set containing the origin.
#[derive(Clone, Debug, PartialEq)]
pub enum LambdaSet {
    NonnegativeOrthant,
    /// `0 ≤ ρ ≤ upper`.
    Box { upper: Vector },
    /// `C ρ ≤ d` with `d ≥ 0`.
    Polyhedron { c: Matrix, d: Vector },
}

impl LambdaSet {
    pub fn boxed(upper: Vector) -> Result<Self> {
        if upper.iter().any(|&g| g.is_nan() || g < 0.0) {
            return Err(Error::Hypothesis(
                "box upper bounds must be nonnegative so that 0 lies in the multiplier set".into(),
            ));
        }
        Ok(Self::Box { upper })
    }

    pub fn polyhedron(c: Matrix, d: Vector) -> Result<Self> {
        if c.nrows() != d.len() {
            return Err(Error::Shape(format!(
                "polyhedron has {} rows but {} right-hand sides",
                c.nrows(),
                d.len()
            )));
        }
        if d.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::Hypothesis(
                "polyhedron right-hand side must be nonnegative so that 0 is feasible".into(),
            ));
        }
        Ok(Self::Polyhedron { c, d })
    }

    /// `{0}` expressed as a box with zero upper bound.
    pub fn origin(m: usize) -> Self {
        Self::Box {
            upper: Vector::zeros(m),
        }
    }

    pub fn project(&self, rho: &Vector) -> Result<Vector> {
        match self {
            Self::NonnegativeOrthant => Ok(rho.map(|x| x.max(0.0))),
            Self::Box { upper } => Ok(Vector::from_fn(rho.len(), |i, _| rho[i].clamp(0.0, upper[i]))),
            Self::Polyhedron { c, d } => project_polyhedron(c, d, rho),
        }
    }

    /// Membership test; polyhedral constraints are allowed a violation of `tol`.
    pub fn contains(&self, rho: &Vector, tol: f64) -> bool {
        match self {
            Self::NonnegativeOrthant => rho.iter().all(|&x| x >= 0.0),
            Self::Box { upper } => rho.iter().zip(upper.iter()).all(|(&x, &g)| 0.0 <= x && x <= g),
            Self::Polyhedron { c, d } => (c * rho - d).iter().all(|&v| v <= tol),
        }
    }

    /// True when the set is a cone, so that complementarity `b(u, λ) = 0`
    /// is part of the multiplier inequality.
    pub fn is_cone(&self) -> bool {
        match self {
            Self::NonnegativeOrthant => true,
            Self::Box { upper } => upper.iter().all(|&g| g == 0.0),
            Self::Polyhedron { d, .. } => d.iter().all(|&x| x == 0.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::NonnegativeOrthant => "orthant",
            Self::Box { .. } => "box",
            Self::Polyhedron { .. } => "polyhedron",
        }
    }
}

pub fn project_lambda(set: &LambdaSet, rho: &Vector) -> Result<Vector> {
    set.project(rho)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HFunctionSpec {
    /// `h(v) = c_h ‖v‖^τ`.
    PowerNorm { c_h: f64, tau: f64 },
    Zero,
}

impl HFunctionSpec {
    pub fn power(c_h: f64, tau: f64) -> Result<Self> {
        if !(c_h > 0.0 && c_h.is_finite()) {
            return Err(Error::Hypothesis(format!("c_h must be positive, got {c_h}")));
        }
        if !(tau > 1.0 && tau.is_finite()) {
            return Err(Error::Hypothesis(format!("tau must exceed 1, got {tau}")));
        }
        Ok(Self::PowerNorm { c_h, tau })
    }

    pub fn eval(&self, v: &Vector) -> f64 {
        match *self {
            Self::PowerNorm { c_h, tau } => c_h * v.norm().powf(tau),
            Self::Zero => 0.0,
        }
    }

    pub fn is_convex(&self) -> bool {
        true
    }

    pub fn c_h(&self) -> f64 {
        match *self {
            Self::PowerNorm { c_h, .. } => c_h,
            Self::Zero => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Declared,
    Estimated { samples: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProfileProvenance {
    pub theta: Provenance,
    pub alpha_j: Provenance,
    pub beta_j: Provenance,
    pub m_j: Provenance,
    pub alpha_b: Provenance,
}

/// Growth and monotonicity constants attached to an instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypothesisProfile {
    pub theta: f64,
    pub alpha_j: f64,
    pub beta_j: f64,
    pub m_j: f64,
    pub alpha_b: f64,
    pub provenance: ProfileProvenance,
}

impl HypothesisProfile {
    /// Declared growth constants; `α_b` is filled in from `B` when the
    /// instance is assembled.
    pub fn declared(theta: f64, alpha_j: f64, beta_j: f64, m_j: f64) -> Result<Self> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::Hypothesis(format!("theta must be nonnegative, got {theta}")));
        }
        if !(alpha_j >= 0.0 && alpha_j.is_finite()) {
            return Err(Error::Hypothesis(format!("alpha_J must be nonnegative, got {alpha_j}")));
        }
        if !(beta_j > 0.0 && beta_j.is_finite()) {
            return Err(Error::Hypothesis(format!("beta_J must be positive, got {beta_j}")));
        }
        if !(m_j >= 0.0 && m_j.is_finite()) {
            return Err(Error::Hypothesis(format!("m_J must be nonnegative, got {m_j}")));
        }
        Ok(Self {
            theta,
            alpha_j,
            beta_j,
            m_j,
            alpha_b: 0.0,
            provenance: ProfileProvenance {
                theta: Provenance::Declared,
                alpha_j: Provenance::Declared,
                beta_j: Provenance::Declared,
                m_j: Provenance::Declared,
                alpha_b: Provenance::Estimated { samples: 0 },
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub dims: SpaceDims,
    pub a: OperatorSpec,
    pub j: PiecewiseC1Spec,
    pub gamma: GammaSpec,
    pub b: BilinearFormSpec,
    pub lambda: LambdaSet,
    pub f: Vector,
    pub h: HFunctionSpec,
    pub profile: HypothesisProfile,
}

impl ProblemInstance {
    /// Assemble and validate an instance. `α_b` in the profile is replaced by
    /// the inf-sup constant of `B`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: OperatorSpec,
        j: PiecewiseC1Spec,
        gamma: GammaSpec,
        b: BilinearFormSpec,
        lambda: LambdaSet,
        f: Vector,
        h: HFunctionSpec,
        profile: HypothesisProfile,
    ) -> Result<Self> {
        let dims = SpaceDims::new(a.p.nrows(), b.b.nrows(), gamma.g.nrows())?;
        let inst = Self {
            dims,
            a,
            j,
            gamma,
            b,
            lambda,
            f,
            h,
            profile,
        };
        inst.validate()?;
        let mut inst = inst;
        inst.profile.alpha_b = crate::hypotheses::infsup_constant(&inst.b);
        inst.profile.provenance.alpha_b = Provenance::Estimated { samples: 0 };
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        let SpaceDims { n, m, k } = self.dims;
        let shape = |what: &str, got: (usize, usize), want: (usize, usize)| {
            if got != want {
                Err(Error::Shape(format!(
                    "{what} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )))
            } else {
                Ok(())
            }
        };
        shape("P", self.a.p.shape(), (n, n))?;
        shape("G", self.gamma.g.shape(), (k, n))?;
        shape("B", self.b.b.shape(), (m, n))?;
        if self.f.len() != n {
            return Err(Error::Shape(format!("f has length {}, expected {n}", self.f.len())));
        }
        if self.j.dim() != k {
            return Err(Error::Shape(format!("J has {} coordinates, expected {k}", self.j.dim())));
        }
        match &self.lambda {
            LambdaSet::NonnegativeOrthant => {}
            LambdaSet::Box { upper } => {
                if upper.len() != m {
                    return Err(Error::Shape(format!("box bound has length {}, expected {m}", upper.len())));
                }
                if upper.iter().any(|&g| g.is_nan() || g < 0.0) {
                    return Err(Error::Hypothesis("0 is not in the box multiplier set".into()));
                }
            }
            LambdaSet::Polyhedron { c, d } => {
                if c.ncols() != m || c.nrows() != d.len() {
                    return Err(Error::Shape(format!(
                        "polyhedron is {}x{} with {} right-hand sides, expected {m} columns",
                        c.nrows(),
                        c.ncols(),
                        d.len()
                    )));
                }
                if d.iter().any(|&x| x.is_nan() || x < 0.0) {
                    return Err(Error::Hypothesis("0 is not in the polyhedral multiplier set".into()));
                }
            }
        }
        let finite = |x: &Matrix| x.iter().all(|v| v.is_finite());
        if !finite(&self.a.p) || !finite(&self.gamma.g) || !finite(&self.b.b) || self.f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite matrix or vector entry".into()));
        }
        if let Some(pw) = self.a.power {
            if !(pw.p >= 2.0 && pw.p.is_finite() && pw.c >= 0.0 && pw.c.is_finite()) {
                return Err(Error::Hypothesis(format!(
                    "power term needs p >= 2 and c >= 0, got p = {}, c = {}",
                    pw.p, pw.c
                )));
            }
        }
        if !(self.a.declared_m_a >= 0.0 && self.a.declared_m_a.is_finite()) {
            return Err(Error::Hypothesis("m_A must be nonnegative".into()));
        }
        if let HFunctionSpec::PowerNorm { c_h, tau } = self.h {
            HFunctionSpec::power(c_h, tau)?;
        }
        Ok(())
    }

    pub fn with_f(&self, f: Vector) -> Self {
        assert_eq!(f.len(), self.dims.n, "load has the wrong length");
        Self { f, ..self.clone() }
    }

    pub fn apply_a(&self, u: &Vector) -> Vector {
        self.a.apply(u)
    }

    pub fn eval_b(&self, v: &Vector, rho: &Vector) -> f64 {
        self.b.eval(v, rho)
    }

    pub fn project_lambda(&self, rho: &Vector) -> Result<Vector> {
        self.lambda.project(rho)
    }

    /// `J⁰(γu; γd)` using the exact box oracle.
    pub fn j0(&self, u: &Vector, d: &Vector) -> f64 {
        self.j.clarke_dir(&self.gamma.apply(u), &self.gamma.apply(d))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        instance_from_json(text)
    }

    pub fn to_json(&self) -> String {
        instance_to_json(self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_instance(path)
    }
}

/// Sampling metadata attached to a residual report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingInfo {
    pub directions: usize,
    pub seed: u64,
    pub refine: bool,
}

/// Worst violations of the four equivalent formulations, each clamped at 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualReport {
    pub r_original: f64,
    pub r_minty: f64,
    pub r_combined: f64,
    pub r_minty_combined: f64,
    pub sampling: SamplingInfo,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.r_original
            .max(self.r_minty)
            .max(self.r_combined)
            .max(self.r_minty_combined)
    }

    pub fn certified(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionPair {
    pub u: Vector,
    pub lambda: Vector,
    pub residuals: ResidualReport,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    #[test]
    fn apply_a_examples() {
        let a = OperatorSpec::linear(Matrix::from_row_slice(1, 1, &[2.0]), 2.0);
        assert_eq!(a.apply(&v(&[3.0])), v(&[6.0]));
        let a = OperatorSpec {
            p: Matrix::zeros(1, 1),
            power: Some(PowerTerm { p: 3.0, c: 1.0 }),
            declared_m_a: 0.0,
        };
        assert_eq!(a.apply(&v(&[2.0])), v(&[4.0]));
        assert_eq!(a.apply(&v(&[-2.0])), v(&[-4.0]));
        let a = OperatorSpec::linear(Matrix::identity(2, 2) * 2.0, 2.0);
        assert_eq!(a.apply(&v(&[1.0, -1.0])), v(&[2.0, -2.0]));
    }

    #[test]
    fn eval_b_examples() {
        let b = BilinearFormSpec { b: Matrix::from_row_slice(1, 1, &[1.0]) };
        assert_eq!(b.eval(&v(&[2.0]), &v(&[3.0])), 6.0);
        let b = BilinearFormSpec { b: Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]) };
        assert_eq!(b.eval(&v(&[1.0, 1.0]), &v(&[1.0, 1.0])), 3.0);
        assert_eq!(b.eval(&v(&[0.0, 0.0]), &v(&[-4.0, 9.0])), 0.0);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(LambdaSet::NonnegativeOrthant.project(&v(&[-1.0, 2.0])).unwrap(), v(&[0.0, 2.0]));
        let bx = LambdaSet::boxed(v(&[1.0, 1.0])).unwrap();
        assert_eq!(bx.project(&v(&[2.0, 0.5])).unwrap(), v(&[1.0, 0.5]));
        let poly = LambdaSet::polyhedron(Matrix::from_row_slice(1, 2, &[1.0, 1.0]), v(&[1.0])).unwrap();
        for set in [LambdaSet::NonnegativeOrthant, bx, poly] {
            let inside = v(&[0.25, 0.5]);
            assert_eq!(set.project(&inside).unwrap(), inside);
        }
    }

    #[test]
    fn lambda_set_rejects_missing_origin() {
        assert!(matches!(LambdaSet::boxed(v(&[-1.0])), Err(Error::Hypothesis(_))));
        assert!(matches!(
            LambdaSet::polyhedron(Matrix::from_row_slice(1, 1, &[1.0]), v(&[-0.5])),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn h_function() {
        let h = HFunctionSpec::power(1.5, 2.0).unwrap();
        assert_eq!(h.eval(&v(&[3.0, 4.0])), 37.5);
        assert_eq!(HFunctionSpec::Zero.eval(&v(&[3.0])), 0.0);
        assert!(HFunctionSpec::power(0.0, 2.0).is_err());
        assert!(HFunctionSpec::power(1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_norm_is_largest_singular_value() {
        let g = GammaSpec::new(Matrix::from_row_slice(1, 2, &[3.0, 4.0]));
        assert!((g.operator_norm() - 5.0).abs() <= 1e-12);
    }
}
