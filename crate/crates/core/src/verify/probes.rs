//! Numerical probes of the solution set and the solution map `f ↦ S(f)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{residual, residual_report, Formulation, ProbeConfig, CERT_TOL, KINK_EPS};
use crate::error::{Error, Result};
use crate::linalg::{random_in_ball, Vector};
use crate::problem::{HFunctionSpec, ProblemInstance, SolutionPair};
use crate::solver::{solve, SolverConfig, Termination};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityResult {
    /// Largest combined residual along the segment.
    pub worst: f64,
    /// False when an endpoint failed certification; `worst` is then an input
    /// error rather than evidence about the solution set.
    pub inputs_certified: bool,
}

/// Combined residual along the segment between two solutions.
pub fn convexity_probe(
    inst: &ProblemInstance,
    sol1: &SolutionPair,
    sol2: &SolutionPair,
    t_grid: &[f64],
    tol: f64,
    probes: &ProbeConfig,
) -> Result<ConvexityResult> {
    if !inst.h.is_convex() {
        return Err(Error::HypothesisGate("h is not convex".into()));
    }
    let mut certified = true;
    for sol in [sol1, sol2] {
        let rep = residual_report(inst, &sol.u, &sol.lambda, probes)?;
        certified &= rep.certified(tol);
    }
    let mut worst = 0.0_f64;
    for &t in t_grid {
        let u = &sol1.u * t + &sol2.u * (1.0 - t);
        let l = &sol1.lambda * t + &sol2.lambda * (1.0 - t);
        let r = residual(inst, &u, &l, Formulation::Combined, probes)?;
        worst = worst.max(r.violation);
    }
    Ok(ConvexityResult {
        worst,
        inputs_certified: certified,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundednessReport {
    pub solutions: Vec<SolutionPair>,
    pub loads: Vec<Vector>,
    pub sup_u: f64,
    pub sup_lambda: f64,
    pub diameter_u: f64,
    pub diameter_lambda: f64,
    /// Smallest slack in `⟨Au, u⟩ ≤ α_J + β_J‖γ‖^θ‖u‖^θ + ‖f‖‖u‖`.
    pub chain_slack: f64,
    /// Smallest slack in `α_b‖λ‖ ≤ ‖Au‖ + max‖γᵀξ‖ + ‖f‖`.
    pub multiplier_slack: f64,
    pub uncertified: usize,
}

impl BoundednessReport {
    pub fn bounds_hold(&self) -> bool {
        self.chain_slack >= 0.0 && self.multiplier_slack >= 0.0
    }
}

/// Slack of the coercivity chain at a solution; negative means violated.
pub fn chain_slack(inst: &ProblemInstance, u: &Vector) -> f64 {
    let p = &inst.profile;
    let lhs = inst.apply_a(u).dot(u);
    let nu = u.norm();
    let rhs = p.alpha_j + p.beta_j * (inst.gamma.operator_norm() * nu).powf(p.theta) + inst.f.norm() * nu;
    rhs - lhs + 1e-9 * (1.0 + lhs.abs())
}

/// Slack of the multiplier bound at a solution; negative means violated.
pub fn multiplier_slack(inst: &ProblemInstance, u: &Vector, lambda: &Vector) -> f64 {
    let bx = inst.j.subgradient_box_within(&inst.gamma.apply(u), KINK_EPS);
    let sub = bx
        .vertices()
        .iter()
        .map(|xi| inst.gamma.adjoint(xi).norm())
        .fold(0.0_f64, f64::max);
    let lhs = inst.profile.alpha_b * lambda.norm();
    let rhs = inst.apply_a(u).norm() + sub + inst.f.norm();
    rhs - lhs + 1e-9 * (1.0 + lhs)
}

fn max_pairwise(points: &[&Vector]) -> f64 {
    let mut best = 0.0_f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((*a - *b).norm());
        }
    }
    best
}

/// Solve for loads drawn from the ball `‖f‖ ≤ radius` (coordinate extremes
/// first) and check the a-priori bounds on every solution.
pub fn boundedness_probe(
    inst: &ProblemInstance,
    f_ball_radius: f64,
    samples: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<BoundednessReport> {
    let n = inst.dims.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut loads = Vec::with_capacity(samples);
    'extremes: for i in 0..n {
        for sign in [-1.0, 1.0] {
            if loads.len() >= samples {
                break 'extremes;
            }
            let mut f = Vector::zeros(n);
            f[i] = sign * f_ball_radius;
            loads.push(f);
        }
    }
    while loads.len() < samples {
        loads.push(random_in_ball(&mut rng, n, f_ball_radius));
    }
    let mut solutions = Vec::with_capacity(samples);
    let mut chain = f64::INFINITY;
    let mut mult = f64::INFINITY;
    let mut uncertified = 0;
    for f in &loads {
        let sub = inst.with_f(f.clone());
        let (sol, trace) = solve(&sub, cfg)?;
        if trace.termination != Termination::Converged || !sol.residuals.certified(CERT_TOL) {
            uncertified += 1;
        }
        chain = chain.min(chain_slack(&sub, &sol.u));
        if inst.profile.alpha_b > 0.0 {
            mult = mult.min(multiplier_slack(&sub, &sol.u, &sol.lambda));
        }
        solutions.push(sol);
    }
    let sup_u = solutions.iter().map(|s| s.u.norm()).fold(0.0, f64::max);
    let sup_lambda = solutions.iter().map(|s| s.lambda.norm()).fold(0.0, f64::max);
    let us: Vec<&Vector> = solutions.iter().map(|s| &s.u).collect();
    let ls: Vec<&Vector> = solutions.iter().map(|s| &s.lambda).collect();
    Ok(BoundednessReport {
        diameter_u: max_pairwise(&us),
        diameter_lambda: max_pairwise(&ls),
        solutions,
        loads,
        sup_u,
        sup_lambda,
        chain_slack: chain,
        multiplier_slack: mult,
        uncertified,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityResult {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

/// Hölder bound `‖u(f₁) − u(f₂)‖ ≤ (‖f₁ − f₂‖/c_h)^{1/(τ−1)}`.
///
/// The constant sits in the denominator: that is what the chain
/// `c_h‖u₁ − u₂‖^τ ≤ ⟨f₁ − f₂, u₁ − u₂⟩ ≤ ‖f₁ − f₂‖‖u₁ − u₂‖` yields.
pub fn stability_check(inst: &ProblemInstance, f1: &Vector, f2: &Vector, cfg: &SolverConfig) -> Result<StabilityResult> {
    let HFunctionSpec::PowerNorm { c_h, tau } = inst.h else {
        return Err(Error::HypothesisGate("stability bound needs a power-form h".into()));
    };
    let mut us = Vec::with_capacity(2);
    for f in [f1, f2] {
        let (sol, trace) = solve(&inst.with_f(f.clone()), cfg)?;
        if trace.termination != Termination::Converged || !sol.residuals.certified(CERT_TOL) {
            return Err(Error::HypothesisGate(format!(
                "solve for f = {:?} is not certified (residual {:e})",
                f.as_slice(),
                sol.residuals.max()
            )));
        }
        us.push(sol.u);
    }
    Ok(stability_bound(&us[0], &us[1], f1, f2, c_h, tau))
}

pub fn stability_bound(u1: &Vector, u2: &Vector, f1: &Vector, f2: &Vector, c_h: f64, tau: f64) -> StabilityResult {
    let lhs = (u1 - u2).norm();
    let rhs = ((f1 - f2).norm() / c_h).powf(1.0 / (tau - 1.0));
    StabilityResult {
        lhs,
        rhs,
        passed: lhs <= rhs * (1.0 + 1e-8),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UscReport {
    pub loads: Vec<Vector>,
    /// Combined residual of `(u_n, λ_n)` against the limit load.
    pub residuals: Vec<f64>,
    /// `(R_n + ‖u_n‖)‖f_n − f‖ + tol`, the bound the residual must respect.
    pub bounds: Vec<f64>,
    pub lambdas: Vec<Vector>,
    pub nonincreasing: bool,
    pub within_bounds: bool,
    pub final_certified: bool,
}

/// Solve along `f_n = f + scale·2⁻ⁿ·e₁` and measure how well each solution
/// satisfies the limit problem.
pub fn usc_probe(
    inst: &ProblemInstance,
    f: &Vector,
    perturbation_scale: f64,
    steps: usize,
    cfg: &SolverConfig,
    tol: f64,
) -> Result<UscReport> {
    let limit = inst.with_f(f.clone());
    let mut loads = Vec::with_capacity(steps);
    let mut residuals = Vec::with_capacity(steps);
    let mut bounds = Vec::with_capacity(steps);
    let mut lambdas = Vec::with_capacity(steps);
    for k in 1..=steps {
        let mut fk = f.clone();
        fk[0] += perturbation_scale * 0.5f64.powi(k as i32);
        let (sol, _) = solve(&inst.with_f(fk.clone()), cfg)?;
        let r = residual(&limit, &sol.u, &sol.lambda, Formulation::Combined, &cfg.probes)?;
        let probe_radius = 2.0 * (sol.u.norm() + 1.0);
        bounds.push((2.0 * probe_radius + sol.u.norm()) * (&fk - f).norm() + tol);
        residuals.push(r.violation);
        lambdas.push(sol.lambda);
        loads.push(fk);
    }
    let nonincreasing = residuals.windows(2).all(|w| w[1] <= w[0] + tol);
    let within_bounds = residuals.iter().zip(&bounds).all(|(r, b)| r <= b);
    let final_certified = residuals.last().is_some_and(|&r| r <= tol);
    Ok(UscReport {
        loads,
        residuals,
        bounds,
        lambdas,
        nonincreasing,
        within_bounds,
        final_certified,
    })
}
