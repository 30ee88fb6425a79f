//! Reference solvers for the two classical special cases: no nonsmooth term
//! (a linear complementarity system) and no multiplier coupling (a pure
//! hemivariational inclusion).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{residual, Formulation, CERT_TOL};
use crate::error::{Error, Result};
use crate::linalg::{random_in_ball, solve_square, Matrix, Vector};
use crate::problem::{LambdaSet, ProblemInstance};
use crate::solver::{enumerate_inclusion, inner_solve_u, solve, SolverConfig};

/// Most multiplier components the active-set enumeration accepts.
pub const MAX_ACTIVE_SET_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecialCase {
    /// `J ≡ 0`: a mixed variational inequality with multipliers.
    NoNonsmoothTerm,
    /// `B = 0`: the multiplier decouples and `u` solves a pure inclusion.
    NoCoupling,
    /// Both at once: a linear solve.
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrosscheckReport {
    pub case: SpecialCase,
    pub reference_u: Vector,
    pub solver_u: Vector,
    pub u_error: f64,
    /// Distance from the solver's multiplier to the nearest reference one.
    pub lambda_error: f64,
    /// Spread of `u` across multiplier trials; only measured without coupling.
    pub lambda_independence: Option<f64>,
    /// Original-form residual with `λ = 0`; only measured without coupling.
    pub hvi_residual: Option<f64>,
    pub passed: bool,
}

fn linear_part(inst: &ProblemInstance) -> Result<&Matrix> {
    if !inst.a.is_linear() {
        return Err(Error::InvalidArgument("reference solvers need a linear operator".into()));
    }
    Ok(&inst.a.p)
}

fn push_unique(out: &mut Vec<(Vector, Vector)>, u: Vector, l: Vector) {
    if !out.iter().any(|(a, b)| (a - &u).norm() <= 1e-9 && (b - &l).norm() <= 1e-9) {
        out.push((u, l));
    }
}

/// All KKT pairs of `Pu + Bᵀλ = f`, `λ ∈ Λ`, `b(u, ρ − λ) ≤ 0 ∀ρ ∈ Λ` for
/// `J ≡ 0`, found by enumerating active sets: two per component on the
/// orthant, three on a box.
pub fn qp_active_set(inst: &ProblemInstance) -> Result<Vec<(Vector, Vector)>> {
    if !inst.j.is_zero() {
        return Err(Error::InvalidArgument("active-set reference needs J = 0".into()));
    }
    let p = linear_part(inst)?;
    let (n, m) = (inst.dims.n, inst.dims.m);
    if m > MAX_ACTIVE_SET_DIM {
        return Err(Error::DimensionLimit(format!(
            "active-set enumeration needs m <= {MAX_ACTIVE_SET_DIM}, got {m}"
        )));
    }
    let upper = match &inst.lambda {
        LambdaSet::NonnegativeOrthant => None,
        LambdaSet::Box { upper } => Some(upper.clone()),
        LambdaSet::Polyhedron { .. } => {
            return Err(Error::InvalidArgument(
                "active-set reference supports the orthant and boxes only".into(),
            ))
        }
    };
    let b = &inst.b.b;
    let f = &inst.f;
    // 0: λᵢ = 0, 1: (Bu)ᵢ = 0, 2: λᵢ = gᵢ.
    let radix = vec![if upper.is_some() { 3 } else { 2 }; m];
    let mut idx = vec![0; m];
    let scale = 1.0 + f.amax() + p.amax() + b.amax();
    let tol = 1e-9 * scale;
    let mut out = Vec::new();
    loop {
        let mut k = Matrix::zeros(n + m, n + m);
        let mut rhs = Vector::zeros(n + m);
        k.view_mut((0, 0), (n, n)).copy_from(p);
        k.view_mut((0, n), (n, m)).copy_from(&b.transpose());
        rhs.rows_mut(0, n).copy_from(f);
        for i in 0..m {
            match idx[i] {
                0 => k[(n + i, n + i)] = 1.0,
                1 => k.view_mut((n + i, 0), (1, n)).copy_from(&b.row(i)),
                _ => {
                    k[(n + i, n + i)] = 1.0;
                    rhs[n + i] = upper.as_ref().map_or(0.0, |g| g[i]);
                }
            }
        }
        if let Some(x) = solve_square(&k, &rhs) {
            let u = x.rows(0, n).into_owned();
            let l = x.rows(n, m).into_owned();
            let bu = b * &u;
            let consistent = (&k * &x - &rhs).amax() <= tol;
            let feasible = (0..m).all(|i| {
                let g = upper.as_ref().map_or(f64::INFINITY, |g| g[i]);
                let in_set = l[i] >= -tol && l[i] <= g + tol;
                in_set
                    && match idx[i] {
                        0 => bu[i] <= tol,
                        1 => true,
                        _ => bu[i] >= -tol,
                    }
            });
            if consistent && feasible {
                let l = match &upper {
                    Some(g) => Vector::from_fn(m, |i, _| l[i].clamp(0.0, g[i])),
                    None => l.map(|x| x.max(0.0)),
                };
                push_unique(&mut out, u, l);
            }
        }
        if !crate::solver::next_branch(&mut idx, &radix) {
            break;
        }
    }
    Ok(out)
}

/// All solutions of `f − Pu ∈ γᵀ ∂J(γu)` for linear `A`.
pub fn inclusion_enumeration(inst: &ProblemInstance) -> Result<Vec<Vector>> {
    Ok(enumerate_inclusion(inst, &inst.f)?.into_iter().map(|(u, _)| u).collect())
}

/// Compare the main solver against the reference solver for whichever
/// special case the instance falls into.
pub fn special_case_crosscheck(inst: &ProblemInstance, cfg: &SolverConfig, seed: u64) -> Result<CrosscheckReport> {
    let j_zero = inst.j.is_zero();
    let b_zero = inst.b.is_zero();
    let case = match (j_zero, b_zero) {
        (true, true) => SpecialCase::Linear,
        (true, false) => SpecialCase::NoNonsmoothTerm,
        (false, true) => SpecialCase::NoCoupling,
        (false, false) => {
            return Err(Error::InvalidArgument(
                "crosscheck needs J = 0 or B = 0".into(),
            ))
        }
    };
    let (sol, _) = solve(inst, cfg)?;
    let nearest = |refs: &[Vector], x: &Vector| refs.iter().map(|r| (r - x).norm()).fold(f64::INFINITY, f64::min);
    let (refs_u, refs_l): (Vec<Vector>, Vec<Vector>) = if j_zero {
        qp_active_set(inst)?.into_iter().unzip()
    } else {
        (inclusion_enumeration(inst)?, Vec::new())
    };
    if refs_u.is_empty() {
        return Err(Error::InvalidArgument("reference solver found no solution".into()));
    }
    let u_error = nearest(&refs_u, &sol.u);
    let reference_u = refs_u
        .iter()
        .min_by(|a, b| (*a - &sol.u).norm().total_cmp(&(*b - &sol.u).norm()))
        .cloned()
        .unwrap_or_else(|| Vector::zeros(inst.dims.n));
    let lambda_error = if b_zero { 0.0 } else { nearest(&refs_l, &sol.lambda) };
    let (lambda_independence, hvi_residual) = if b_zero {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spread = 0.0_f64;
        for _ in 0..4 {
            let trial = inst.project_lambda(&random_in_ball(&mut rng, inst.dims.m, 10.0))?;
            let u = inner_solve_u(inst, &trial, &sol.u, cfg)?;
            spread = spread.max((u - &sol.u).norm());
        }
        let zero = Vector::zeros(inst.dims.m);
        let r = residual(inst, &sol.u, &zero, Formulation::Original, &cfg.probes)?;
        (Some(spread), Some(r.violation))
    } else {
        (None, None)
    };
    let passed = u_error <= 1e-8
        && lambda_independence.is_none_or(|s| s <= 1e-8)
        && hvi_residual.is_none_or(|r| r <= CERT_TOL);
    Ok(CrosscheckReport {
        case,
        reference_u,
        solver_u: sol.u,
        u_error,
        lambda_error,
        lambda_independence,
        hvi_residual,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonsmooth::{CoordinateFunction, PiecewiseC1Spec};
    use crate::problem::{BilinearFormSpec, GammaSpec, HFunctionSpec, HypothesisProfile, OperatorSpec};

    fn scalar(j: PiecewiseC1Spec, b: f64, f: f64) -> ProblemInstance {
        ProblemInstance::new(
            OperatorSpec::linear(Matrix::from_element(1, 1, 2.0), 2.0),
            j,
            GammaSpec::new(Matrix::identity(1, 1)),
            BilinearFormSpec {
                b: Matrix::from_element(1, 1, b),
            },
            LambdaSet::NonnegativeOrthant,
            Vector::from_element(1, f),
            HFunctionSpec::power(1.5, 2.0).unwrap(),
            HypothesisProfile::declared(2.0, 0.0, 0.5, 0.5).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_lcp_closed_form() {
        for f in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            let pts = qp_active_set(&scalar(PiecewiseC1Spec::zero(1), 1.0, f)).unwrap();
            assert_eq!(pts.len(), 1, "f = {f}");
            let (u, l) = &pts[0];
            let (eu, el) = if f <= 0.0 { (f / 2.0, 0.0) } else { (0.0, f) };
            assert!((u[0] - eu).abs() < 1e-12 && (l[0] - el).abs() < 1e-12, "f = {f}: {u} {l}");
        }
    }

    #[test]
    fn box_multiplier_saturates() {
        let mut inst = scalar(PiecewiseC1Spec::zero(1), 1.0, 4.0);
        inst.lambda = LambdaSet::boxed(Vector::from_element(1, 1.0)).unwrap();
        let pts = qp_active_set(&inst).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].0[0] - 1.5).abs() < 1e-12 && (pts[0].1[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inclusion_closed_form() {
        let j = PiecewiseC1Spec::uniform(1, CoordinateFunction::kink(1.0, -0.5));
        let us = inclusion_enumeration(&scalar(j.clone(), 0.0, -2.0)).unwrap();
        assert_eq!(us.len(), 1);
        assert!((us[0][0] + 2.0 / 3.0).abs() < 1e-12);
        let us = inclusion_enumeration(&scalar(j, 0.0, 0.5)).unwrap();
        assert_eq!(us.len(), 1);
        assert!(us[0][0].abs() < 1e-12);
    }

    #[test]
    fn linear_reduction() {
        let inst = scalar(PiecewiseC1Spec::zero(1), 0.0, 3.0);
        let rep = special_case_crosscheck(&inst, &SolverConfig::default(), 0).unwrap();
        assert_eq!(rep.case, SpecialCase::Linear);
        assert!((rep.reference_u[0] - 1.5).abs() < 1e-12);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn uncoupled_kink_is_independent_of_multiplier() {
        let j = PiecewiseC1Spec::uniform(1, CoordinateFunction::kink(1.0, -0.5));
        let rep = special_case_crosscheck(&scalar(j, 0.0, -2.0), &SolverConfig::default(), 1).unwrap();
        assert_eq!(rep.case, SpecialCase::NoCoupling);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn rejects_general_instances() {
        let j = PiecewiseC1Spec::uniform(1, CoordinateFunction::kink(1.0, -0.5));
        assert!(special_case_crosscheck(&scalar(j, 1.0, 3.0), &SolverConfig::default(), 0).is_err());
    }
}
