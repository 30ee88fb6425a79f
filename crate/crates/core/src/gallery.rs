//! Built-in example instances.

use crate::error::{Error, Result};
use crate::hypotheses::derive_h_from_constants;
use crate::linalg::{sym_min_eigenvalue, Matrix, Vector};
use crate::nonsmooth::{CoordinateFunction, PiecewiseC1Spec, MIN_BETA};
use crate::problem::{
    BilinearFormSpec, GammaSpec, HFunctionSpec, HypothesisProfile, LambdaSet, OperatorSpec, ProblemInstance,
};

pub const GALLERY: [&str; 3] = ["scalar-lcp", "kink-multiplier", "contact-rod-N"];

/// `2u + λ = f` with `u ≤ 0`, `λ ≥ 0`, `λu = 0`; here `f = 1`, so
/// `(u, λ) = (0, 1)`.
pub fn scalar_lcp(f: f64) -> ProblemInstance {
    ProblemInstance::new(
        OperatorSpec::linear(Matrix::from_element(1, 1, 2.0), 2.0),
        PiecewiseC1Spec::zero(1),
        GammaSpec::new(Matrix::identity(1, 1)),
        BilinearFormSpec { b: Matrix::identity(1, 1) },
        LambdaSet::NonnegativeOrthant,
        Vector::from_element(1, f),
        HFunctionSpec::power(2.0, 2.0).expect("valid"),
        HypothesisProfile::declared(2.0, 0.0, MIN_BETA, 0.0).expect("valid"),
    )
    .expect("valid")
}

/// `A(u) = 2u`, `j(x) = |x| − x²/4`, `γ = B = 1`, `Λ = R₊`. For `f = 3` the
/// solution set is `{0} × [2, 4]`.
pub fn kink_multiplier(f: f64) -> ProblemInstance {
    kink_with_coupling(1.0, f)
}

/// The kink instance with `B = 0`; the multiplier is then arbitrary and the
/// inf-sup condition fails.
pub fn kink_uncoupled(f: f64) -> ProblemInstance {
    kink_with_coupling(0.0, f)
}

fn kink_with_coupling(b: f64, f: f64) -> ProblemInstance {
    ProblemInstance::new(
        OperatorSpec::linear(Matrix::from_element(1, 1, 2.0), 2.0),
        PiecewiseC1Spec::uniform(1, CoordinateFunction::kink(1.0, -0.5)),
        GammaSpec::new(Matrix::identity(1, 1)),
        BilinearFormSpec {
            b: Matrix::from_element(1, 1, b),
        },
        LambdaSet::NonnegativeOrthant,
        Vector::from_element(1, f),
        HFunctionSpec::power(1.5, 2.0).expect("valid"),
        HypothesisProfile::declared(2.0, 0.0, 0.5, 0.5).expect("valid"),
    )
    .expect("valid")
}

/// Friction law `w|x| + q x²/2` at the contact node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrictionKernel {
    pub w: f64,
    pub q: f64,
}

impl Default for FrictionKernel {
    fn default() -> Self {
        Self { w: 1.0, q: -0.5 }
    }
}

/// Stiffness that keeps the constant gap open for the default kernel.
pub fn default_rod_stiffness(nodes: usize) -> f64 {
    let e = nodes.saturating_sub(1).max(1) as f64;
    2.0 * e * e
}

/// Rod of `nodes` nodes clamped at node 0, springs of stiffness `k` between
/// neighbours, and a frictional unilateral contact at the free end, which
/// carries the load. The unknowns are the displacements of nodes `1..N`.
pub fn build_contact_rod(nodes: usize, kernel: FrictionKernel, stiffness: f64, load: f64) -> Result<ProblemInstance> {
    if nodes < 2 {
        return Err(Error::InvalidArgument(format!("contact rod needs at least 2 nodes, got {nodes}")));
    }
    if !(stiffness > 0.0 && stiffness.is_finite()) {
        return Err(Error::InvalidArgument(format!("stiffness must be positive, got {stiffness}")));
    }
    let n = nodes - 1;
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        p[(i, i)] = if i + 1 == n { stiffness } else { 2.0 * stiffness };
        if i + 1 < n {
            p[(i, i + 1)] = -stiffness;
            p[(i + 1, i)] = -stiffness;
        }
    }
    let m_a = sym_min_eigenvalue(&p);
    let mut trace = Matrix::zeros(1, n);
    trace[(0, n - 1)] = 1.0;
    let kink = CoordinateFunction::kink(kernel.w, kernel.q);
    let m_j = kink.weak_convexity();
    if !kink.kinks_convex() {
        return Err(Error::Hypothesis("friction kernel has a concave kink".into()));
    }
    // J⁰(v; −v) = −w|v| − q v², so only the quadratic part grows.
    let beta_j = (-kernel.q).max(MIN_BETA);
    let h = derive_h_from_constants(m_a, m_j, 1.0)?;
    let mut f = Vector::zeros(n);
    f[n - 1] = load;
    ProblemInstance::new(
        OperatorSpec::linear(p, m_a),
        PiecewiseC1Spec::uniform(1, kink),
        GammaSpec::new(trace.clone()),
        BilinearFormSpec { b: trace },
        LambdaSet::NonnegativeOrthant,
        f,
        h,
        HypothesisProfile::declared(2.0, 0.0, beta_j, m_j)?,
    )
}

/// Resolve a gallery name; `contact-rod-N` takes the node count as suffix.
pub fn gallery_instance(name: &str) -> Option<Result<ProblemInstance>> {
    match name {
        "scalar-lcp" => Some(Ok(scalar_lcp(1.0))),
        "kink-multiplier" => Some(Ok(kink_multiplier(3.0))),
        "kink-uncoupled" => Some(Ok(kink_uncoupled(3.0))),
        _ => {
            let nodes: usize = name.strip_prefix("contact-rod-")?.parse().ok()?;
            Some(build_contact_rod(nodes, FrictionKernel::default(), default_rod_stiffness(nodes), 3.0))
        }
    }
}
