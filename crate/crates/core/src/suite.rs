//! The acceptance battery: nine property checks with pinned tolerances and
//! time budgets.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gallery::{build_contact_rod, default_rod_stiffness, kink_multiplier, kink_uncoupled, scalar_lcp, FrictionKernel};
use crate::hypotheses::infsup_constant;
use crate::linalg::{random_normal, sym_min_eigenvalue, Matrix, Vector};
use crate::nonsmooth::{check_clarke_laws, PiecewiseC1Spec, MIN_BETA};
use crate::problem::{BilinearFormSpec, HFunctionSpec, HypothesisProfile, LambdaSet, ProblemInstance};
use crate::random::{audited_family, equality_instance, oracle_instance, random_instance, LambdaKind, RandomSpec};
use crate::solver::{multi_start, solve, SolverConfig, Termination};
use crate::verify::{
    all_residuals, boundedness_probe, brute_force_oracle, convexity_probe, oracle_tolerance, special_case_crosscheck,
    stability_bound, ProbeConfig, CERT_TOL,
};

/// Samples used when auditing generated instances.
pub const AUDIT_SAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {}: {} ({:.2} s, budget {} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

pub const CRITERIA: [(&str, u64); 9] = [
    ("formulation equivalence", 120),
    ("oracle agreement", 300),
    ("first-component uniqueness", 120),
    ("Hölder stability", 60),
    ("solution-set convexity", 10),
    ("a-priori bounds", 60),
    ("Clarke calculus", 10),
    ("inf-sup estimator", 5),
    ("special-case crosschecks", 30),
];

fn cheap_probes(seed: u64) -> ProbeConfig {
    ProbeConfig {
        samples: 500,
        seed,
        refine: true,
    }
}

fn solver_config(seed: u64) -> SolverConfig {
    SolverConfig {
        probes: cheap_probes(seed),
        ..SolverConfig::default()
    }
}

fn certified(sol: &crate::problem::SolutionPair, term: Termination) -> bool {
    term == Termination::Converged && sol.residuals.certified(CERT_TOL)
}

/// Run one criterion by number (1 to 9).
pub fn run_criterion(id: usize, seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let result = match id {
        1 => formulation_equivalence(seed),
        2 => oracle_agreement(seed),
        3 => uniqueness(seed),
        4 => holder_stability(seed),
        5 => convexity(seed),
        6 => apriori_bounds(seed),
        7 => clarke_calculus(seed),
        8 => infsup_estimator(seed),
        9 => special_cases(seed),
        _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
    };
    let elapsed = start.elapsed();
    let (name, secs) = CRITERIA.get(id.wrapping_sub(1)).copied().unwrap_or(("unknown", 0));
    let budget = Duration::from_secs(secs);
    let (ok, mut detail) = match result {
        Ok(pair) => pair,
        Err(e) => (false, format!("error: {e}")),
    };
    if elapsed > budget {
        detail.push_str("; over time budget");
    }
    CriterionOutcome {
        id,
        name,
        passed: ok && elapsed <= budget,
        detail,
        elapsed,
        budget,
    }
}

pub fn run_all(seed: u64) -> Vec<CriterionOutcome> {
    (1..=CRITERIA.len()).map(|id| run_criterion(id, seed)).collect()
}

type Check = Result<(bool, String)>;

/// All four residuals at most 1e-7 on every certified solution of 50 random
/// audited instances, with 10⁴ probes and refinement.
fn formulation_equivalence(seed: u64) -> Check {
    const TOL: f64 = 1e-7;
    let family = audited_family(50, seed, AUDIT_SAMPLES)?;
    let probes = ProbeConfig {
        samples: 10_000,
        seed,
        refine: true,
    };
    let cfg = solver_config(seed);
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0_f64);
    for inst in &family {
        let (sol, trace) = solve(inst, &cfg)?;
        if !certified(&sol, trace.termination) {
            skipped += 1;
            continue;
        }
        for r in all_residuals(inst, &sol.u, &sol.lambda, &probes)? {
            worst = worst.max(r.violation);
        }
        checked += 1;
    }
    Ok((
        checked > 0 && worst <= TOL,
        format!("{checked} certified pairs, {skipped} uncertified, worst residual {worst:.3e} (tol {TOL:e})"),
    ))
}

/// Solver state within one grid step (plus 1e-6) of the oracle cluster on
/// 20 instances with `n + m ≤ 3`.
fn oracle_agreement(seed: u64) -> Check {
    const DELTA: f64 = 0.01;
    const RADIUS: f64 = 5.0;
    let cfg = solver_config(seed);
    let (mut worst, mut fails) = (0.0_f64, Vec::new());
    for i in 0..20u64 {
        let inst = oracle_instance(seed.wrapping_add(i), 1 + (i as usize % 2))?;
        let (sol, trace) = solve(&inst, &cfg)?;
        if !certified(&sol, trace.termination) {
            fails.push(format!("#{i} uncertified"));
            continue;
        }
        let tol = oracle_tolerance(&inst, RADIUS, RADIUS, DELTA);
        let res = brute_force_oracle(&inst, RADIUS, RADIUS, DELTA, tol)?;
        let d = res.distance_to_cluster(&sol.u);
        worst = worst.max(d);
        if d > DELTA + 1e-6 || res.boundary_touching {
            fails.push(format!("#{i} distance {d:.3e}, boundary {}", res.boundary_touching));
        }
    }
    Ok((
        fails.is_empty(),
        format!("20 instances, worst distance {worst:.3e} (limit {:e}){}", DELTA + 1e-6, failure_list(&fails)),
    ))
}

fn failure_list(fails: &[String]) -> String {
    if fails.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", fails.join(", "))
    }
}

/// 20 restarts on 20 instances agree on `u` to 1e-7; the kink instance shows
/// a multiplier spread of at least 0.5.
fn uniqueness(seed: u64) -> Check {
    let family = audited_family(20, seed.wrapping_add(1000), AUDIT_SAMPLES)?;
    let cfg = SolverConfig {
        restarts: 20,
        ..solver_config(seed)
    };
    let mut worst = 0.0_f64;
    for (i, inst) in family.iter().enumerate() {
        let rep = multi_start(inst, &cfg, seed.wrapping_add(i as u64))?;
        worst = worst.max(rep.u_spread);
    }
    let kink = multi_start(&kink_multiplier(3.0), &cfg, seed)?;
    Ok((
        worst <= 1e-7 && kink.lambda_spread >= 0.5,
        format!(
            "worst u-spread {worst:.3e} (tol 1e-7), kink multiplier spread {:.3} (need >= 0.5)",
            kink.lambda_spread
        ),
    ))
}

/// The Hölder bound on 100 load pairs for each of 10 instances, and
/// attainment on the equality instance.
fn holder_stability(seed: u64) -> Check {
    let family = audited_family(10, seed.wrapping_add(2000), AUDIT_SAMPLES)?;
    let cfg = solver_config(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pairs, mut fails, mut worst_ratio) = (0, 0, 0.0_f64);
    for inst in &family {
        let HFunctionSpec::PowerNorm { c_h, tau } = inst.h else {
            return Err(Error::HypothesisGate("generated instance without power h".into()));
        };
        for _ in 0..100 {
            let f1 = &inst.f + random_normal(&mut rng, inst.dims.n);
            let f2 = &f1 + random_normal(&mut rng, inst.dims.n) * 10f64.powf(rng.random_range(-3.0..0.0));
            let (s1, t1) = solve(&inst.with_f(f1.clone()), &cfg)?;
            let (s2, t2) = solve(&inst.with_f(f2.clone()), &cfg)?;
            if !certified(&s1, t1.termination) || !certified(&s2, t2.termination) {
                fails += 1;
                continue;
            }
            let r = stability_bound(&s1.u, &s2.u, &f1, &f2, c_h, tau);
            worst_ratio = worst_ratio.max(r.lhs / r.rhs);
            pairs += 1;
            if !r.passed {
                fails += 1;
            }
        }
    }
    let eq = equality_instance(3, 2.0)?;
    let mut eq_gap = 0.0_f64;
    for _ in 0..10 {
        let f1 = random_normal(&mut rng, 3);
        let f2 = random_normal(&mut rng, 3);
        let (s1, _) = solve(&eq.with_f(f1.clone()), &cfg)?;
        let (s2, _) = solve(&eq.with_f(f2.clone()), &cfg)?;
        let r = stability_bound(&s1.u, &s2.u, &f1, &f2, 2.0, 2.0);
        eq_gap = eq_gap.max((r.lhs - r.rhs).abs() / r.rhs);
    }
    Ok((
        fails == 0 && eq_gap <= 1e-8,
        format!(
            "{pairs} pairs, {fails} failures, worst lhs/rhs {worst_ratio:.4}, equality-case gap {eq_gap:.2e} (tol 1e-8)"
        ),
    ))
}

/// Convex combinations of harvested kink solutions stay solutions.
fn convexity(seed: u64) -> Check {
    let inst = kink_multiplier(3.0);
    let cfg = SolverConfig {
        restarts: 11,
        ..solver_config(seed)
    };
    let rep = multi_start(&inst, &cfg, seed)?;
    let sols = rep.solutions;
    let probes = ProbeConfig {
        samples: 10_000,
        seed,
        refine: true,
    };
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let (mut worst, mut all_certified) = (0.0_f64, true);
    for i in 0..10 {
        let res = convexity_probe(&inst, &sols[i], &sols[i + 1], &grid, CERT_TOL, &probes)?;
        worst = worst.max(res.worst);
        all_certified &= res.inputs_certified;
    }
    let lams: Vec<f64> = sols.iter().map(|s| s.lambda[0]).collect();
    let spread = lams.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lams.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((
        all_certified && worst <= 1e-7,
        format!("10 pairs, multiplier spread {spread:.3}, worst combined residual {worst:.3e} (tol 1e-7)"),
    ))
}

fn bound_instances(seed: u64) -> Result<Vec<ProblemInstance>> {
    let mut out = vec![
        scalar_lcp(1.0),
        kink_multiplier(3.0),
        build_contact_rod(10, FrictionKernel::default(), default_rod_stiffness(10), 3.0)?,
    ];
    out.extend(audited_family(5, seed.wrapping_add(3000), AUDIT_SAMPLES)?);
    Ok(out)
}

/// Multiplier and coercivity-chain bounds on every sampled solution, with
/// sup-norms that agree across two independent load samples.
fn apriori_bounds(seed: u64) -> Check {
    let cfg = solver_config(seed);
    let mut fails = Vec::new();
    let (mut sup_u, mut sup_l) = (0.0_f64, 0.0_f64);
    for (i, inst) in bound_instances(seed)?.iter().enumerate() {
        let a = boundedness_probe(inst, 5.0, 100, seed, &cfg)?;
        let b = boundedness_probe(inst, 5.0, 100, seed.wrapping_add(77), &cfg)?;
        for rep in [&a, &b] {
            if !rep.bounds_hold() || rep.uncertified > 0 {
                fails.push(format!(
                    "#{i} chain slack {:.2e}, multiplier slack {:.2e}, uncertified {}",
                    rep.chain_slack, rep.multiplier_slack, rep.uncertified
                ));
            }
        }
        let close = |x: f64, y: f64| x.is_finite() && y.is_finite() && (x - y).abs() <= 0.25 * x.max(y) + 1e-9;
        if !close(a.sup_u, b.sup_u) || !close(a.sup_lambda, b.sup_lambda) {
            fails.push(format!(
                "#{i} unstable sup-norms u {:.3}/{:.3}, λ {:.3}/{:.3}",
                a.sup_u, b.sup_u, a.sup_lambda, b.sup_lambda
            ));
        }
        sup_u = sup_u.max(a.sup_u.max(b.sup_u));
        sup_l = sup_l.max(a.sup_lambda.max(b.sup_lambda));
    }
    Ok((
        fails.is_empty(),
        format!("8 instances x 2 f-balls of 100 loads, sup |u| {sup_u:.3}, sup |λ| {sup_l:.3}{}", failure_list(&fails)),
    ))
}

/// Largest `|J⁰(x; d) − ⟨∇J(x), d⟩|` at points away from breakpoints, with
/// the gradient taken from central differences of the values. Central
/// differences are exact on quadratic pieces up to rounding.
pub fn smooth_point_gap(j: &PiecewiseC1Spec, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = j.dim();
    let mut worst = 0.0_f64;
    let mut taken = 0;
    while taken < samples {
        let x = Vector::from_fn(k, |_, _| rng.random_range(-5.0..5.0));
        let mut grad = Vector::zeros(k);
        let mut smooth = true;
        for (i, c) in j.coords().iter().enumerate() {
            let gap = c.breakpoints().iter().map(|b| (x[i] - b).abs()).fold(f64::INFINITY, f64::min);
            if gap < 1e-3 {
                smooth = false;
                break;
            }
            let h = (0.25 * gap).min(0.5);
            grad[i] = (c.value(x[i] + h) - c.value(x[i] - h)) / (2.0 * h);
        }
        if !smooth {
            continue;
        }
        taken += 1;
        let d = random_normal(&mut rng, k);
        let err = (j.clarke_dir(&x, &d) - grad.dot(&d)).abs() / (1.0 + grad.norm() * d.norm());
        worst = worst.max(err);
    }
    worst
}

/// Directional-derivative laws on 10⁴ samples per gallery `J`, and
/// smooth-point consistency to 1e-12.
fn clarke_calculus(seed: u64) -> Check {
    let rod = build_contact_rod(10, FrictionKernel::default(), default_rod_stiffness(10), 3.0)?;
    let js = [
        ("scalar-lcp", scalar_lcp(1.0).j),
        ("kink-multiplier", kink_multiplier(3.0).j),
        ("contact-rod-10", rod.j),
    ];
    let mut worst_smooth = 0.0_f64;
    let mut notes = Vec::new();
    for (name, j) in &js {
        let rep = check_clarke_laws(j, 10_000, seed)?;
        let gap = smooth_point_gap(j, 10_000, seed);
        worst_smooth = worst_smooth.max(gap);
        notes.push(format!("{name} max-formula gap {:.1e}", rep.max_formula_gap));
    }
    Ok((
        worst_smooth <= 1e-12,
        format!("{}; smooth-point gap {worst_smooth:.2e} (tol 1e-12)", notes.join(", ")),
    ))
}

/// Inf-sup constant from the eigenvalues of `BBᵀ`, computed independently
/// of the singular value decomposition used by [`infsup_constant`].
pub fn gram_infsup(b: &Matrix) -> f64 {
    let (m, n) = b.shape();
    if m == 0 || n == 0 || m > n {
        return 0.0;
    }
    let eig = (b * b.transpose()).symmetric_eigen().eigenvalues;
    let lmax = eig.iter().fold(0.0_f64, |a, &x| a.max(x));
    let lmin = eig.iter().fold(f64::INFINITY, |a, &x| a.min(x));
    if lmin <= 100.0 * n as f64 * f64::EPSILON * lmax {
        0.0
    } else {
        lmin.sqrt()
    }
}

/// 100 random `B`, a quarter of them rank-deficient and some wide, against
/// the eigenvalue oracle; `infsup(cB) = |c| infsup(B)`.
fn infsup_estimator(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_rel, mut worst_scale, mut deficient) = (0.0_f64, 0.0_f64, 0);
    for i in 0..100 {
        let n = rng.random_range(1..=6);
        let m = if i % 10 == 9 { n + 1 } else { rng.random_range(1..=n) };
        let b = if i % 4 == 3 && m >= 2 {
            deficient += 1;
            let r = rng.random_range(1..m);
            let left = Matrix::from_fn(m, r, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let right = Matrix::from_fn(r, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            left * right
        } else {
            Matrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
        };
        let spec = BilinearFormSpec { b: b.clone() };
        let est = infsup_constant(&spec);
        let oracle = gram_infsup(&b);
        let rel = (est - oracle).abs() / oracle.max(f64::MIN_POSITIVE).max(est);
        worst_rel = worst_rel.max(if est == 0.0 && oracle == 0.0 { 0.0 } else { rel });
        for c in [2.0, -0.5, 1e3, -3.0] {
            let scaled = infsup_constant(&BilinearFormSpec { b: &b * c });
            let expect = c.abs() * est;
            let err = (scaled - expect).abs() / expect.max(f64::MIN_POSITIVE);
            worst_scale = worst_scale.max(if expect == 0.0 && scaled == 0.0 { 0.0 } else { err });
        }
    }
    Ok((
        worst_rel <= 1e-10 && worst_scale <= 1e-12,
        format!(
            "100 matrices ({deficient} rank-deficient), worst relative gap {worst_rel:.2e} (tol 1e-10), scaling error {worst_scale:.2e}"
        ),
    ))
}

fn without_nonsmooth_term(base: &ProblemInstance, lambda: LambdaSet) -> Result<ProblemInstance> {
    let m_a = sym_min_eigenvalue(&base.a.p);
    ProblemInstance::new(
        base.a.clone(),
        PiecewiseC1Spec::zero(base.dims.k),
        base.gamma.clone(),
        base.b.clone(),
        lambda,
        base.f.clone(),
        HFunctionSpec::power(m_a, 2.0)?,
        HypothesisProfile::declared(2.0, 0.0, MIN_BETA, 0.0)?,
    )
}

fn without_coupling(base: &ProblemInstance) -> Result<ProblemInstance> {
    ProblemInstance::new(
        base.a.clone(),
        base.j.clone(),
        base.gamma.clone(),
        BilinearFormSpec {
            b: Matrix::zeros(base.dims.m, base.dims.n),
        },
        base.lambda.clone(),
        base.f.clone(),
        base.h,
        base.profile,
    )
}

/// `J ≡ 0` instances against active-set enumeration, `B = 0` instances
/// against the branch-enumerated inclusion.
fn special_cases(seed: u64) -> Check {
    let cfg = solver_config(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = vec![scalar_lcp(1.0), scalar_lcp(-3.0), kink_uncoupled(-2.0), kink_uncoupled(3.0)];
    for i in 0..10u64 {
        let kind = if i % 2 == 0 { LambdaKind::Orthant } else { LambdaKind::Box };
        let spec = RandomSpec::draw(&mut rng, kind);
        let base = random_instance(seed.wrapping_add(4000 + i), &spec)?;
        cases.push(without_nonsmooth_term(&base, base.lambda.clone())?);
        cases.push(without_coupling(&base)?);
    }
    let (mut worst_u, mut fails) = (0.0_f64, Vec::new());
    for (i, inst) in cases.iter().enumerate() {
        let rep = special_case_crosscheck(inst, &cfg, seed.wrapping_add(i as u64))?;
        worst_u = worst_u.max(rep.u_error);
        if !rep.passed {
            fails.push(format!("#{i} {:?} u error {:.2e}", rep.case, rep.u_error));
        }
    }
    Ok((
        fails.is_empty(),
        format!("{} instances, worst state error {worst_u:.2e} (tol 1e-8){}", cases.len(), failure_list(&fails)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_oracle_on_known_matrices() {
        let b = Matrix::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 4.0, 0.0]);
        assert!((gram_infsup(&b) - 3.0).abs() < 1e-14);
        assert_eq!(gram_infsup(&Matrix::zeros(2, 3)), 0.0);
        assert_eq!(gram_infsup(&Matrix::from_element(3, 2, 1.0)), 0.0);
    }

    #[test]
    fn smooth_gap_on_kink() {
        let j = kink_multiplier(3.0).j;
        assert!(smooth_point_gap(&j, 1000, 3) <= 1e-12);
    }

    #[test]
    fn unknown_criterion_fails() {
        let out = run_criterion(42, 0);
        assert!(!out.passed);
        assert!(out.to_string().starts_with("FAIL [42]"));
    }
}
