//! Residual certification of candidate pairs in four equivalent
//! formulations, a brute-force grid oracle, and numerical probes of the
//! structural properties of the solution set.
//!
//! The formulations, with `e = v − u`:
//!
//! * original: `⟨Au, e⟩ + b(e, λ) + J⁰(γu; γe) ≥ ⟨f, e⟩` and `b(u, ρ − λ) ≤ 0`;
//! * Minty: `⟨Av, e⟩ + b(e, λ) + J⁰(γv; γe) ≥ ⟨f, e⟩ + h(e)` and `b(u, ρ − λ) ≤ 0`;
//! * combined: `⟨Au, e⟩ + b(v, λ) − b(u, ρ) + J⁰(γu; γe) ≥ ⟨f, e⟩`;
//! * Minty combined: `⟨Av, e⟩ + b(v, λ) − b(u, ρ) + J⁰(γv; γe) ≥ ⟨f, e⟩ + h(e)`.
//!
//! Each residual is the largest sampled `RHS − LHS`, clamped at zero.

mod oracle;
mod probes;
mod special;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{random_in_ball, random_normal, random_unit, Vector};
use crate::nonsmooth::SubgradientBox;
use crate::problem::{LambdaSet, ProblemInstance, ResidualReport, SamplingInfo};

pub use oracle::{brute_force_oracle, oracle_tolerance, OracleResult, ORACLE_BUDGET};
pub use probes::{
    boundedness_probe, chain_slack, convexity_probe, multiplier_slack, stability_bound, stability_check, usc_probe,
    BoundednessReport, ConvexityResult, StabilityResult, UscReport,
};
pub use special::{
    inclusion_enumeration, qp_active_set, special_case_crosscheck, CrosscheckReport, SpecialCase, MAX_ACTIVE_SET_DIM,
};

/// Relative distance within which a point counts as sitting on a breakpoint.
pub const KINK_EPS: f64 = 1e-9;

/// Default certification tolerance.
pub const CERT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    Original,
    Minty,
    Combined,
    MintyCombined,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation::Original,
        Formulation::Minty,
        Formulation::Combined,
        Formulation::MintyCombined,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "original" => Some(Self::Original),
            "minty" => Some(Self::Minty),
            "combined" => Some(Self::Combined),
            "minty-combined" => Some(Self::MintyCombined),
            _ => None,
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Original => "original",
            Self::Minty => "minty",
            Self::Combined => "combined",
            Self::MintyCombined => "minty-combined",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig {
    pub samples: usize,
    pub seed: u64,
    pub refine: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 0,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormulationResidual {
    pub formulation: Formulation,
    pub violation: f64,
    pub worst_v: Vector,
    pub worst_rho: Vector,
}

struct Evaluator<'a> {
    inst: &'a ProblemInstance,
    u: &'a Vector,
    lambda: &'a Vector,
    au: Vector,
    box_u: SubgradientBox,
    bu: Vector,
    lam_bu: f64,
    radius: f64,
}

impl<'a> Evaluator<'a> {
    fn new(inst: &'a ProblemInstance, u: &'a Vector, lambda: &'a Vector) -> Self {
        let bu = &inst.b.b * u;
        Self {
            inst,
            u,
            lambda,
            au: inst.apply_a(u),
            box_u: inst.j.subgradient_box_within(&inst.gamma.apply(u), KINK_EPS),
            lam_bu: lambda.dot(&bu),
            bu,
            radius: 2.0 * (u.norm() + 1.0),
        }
    }

    fn j0_at_v(&self, v: &Vector, ge: &Vector) -> f64 {
        self.inst
            .j
            .subgradient_box_within(&self.inst.gamma.apply(v), KINK_EPS)
            .support(ge)
    }

    /// Violation of the state inequality evaluated at `u`.
    fn original(&self, v: &Vector) -> f64 {
        let e = v - self.u;
        let ge = self.inst.gamma.apply(&e);
        let be = &self.inst.b.b * &e;
        self.inst.f.dot(&e) - self.au.dot(&e) - self.lambda.dot(&be) - self.box_u.support(&ge)
    }

    /// Violation of the state inequality evaluated at the test point `v`.
    fn minty(&self, v: &Vector) -> f64 {
        let e = v - self.u;
        let ge = self.inst.gamma.apply(&e);
        let be = &self.inst.b.b * &e;
        self.inst.f.dot(&e) + self.inst.h.eval(&e)
            - self.inst.apply_a(v).dot(&e)
            - self.lambda.dot(&be)
            - self.j0_at_v(v, &ge)
    }

    fn multiplier(&self, rho: &Vector) -> f64 {
        rho.dot(&self.bu) - self.lam_bu
    }

    fn combined_literal(&self, v: &Vector, rho: &Vector) -> f64 {
        let e = v - self.u;
        let ge = self.inst.gamma.apply(&e);
        self.inst.f.dot(&e) - self.au.dot(&e) - self.inst.eval_b(v, self.lambda)
            + self.inst.eval_b(self.u, rho)
            - self.box_u.support(&ge)
    }

    fn minty_combined_literal(&self, v: &Vector, rho: &Vector) -> f64 {
        let e = v - self.u;
        let ge = self.inst.gamma.apply(&e);
        self.inst.f.dot(&e) + self.inst.h.eval(&e)
            - self.inst.apply_a(v).dot(&e)
            - self.inst.eval_b(v, self.lambda)
            + self.inst.eval_b(self.u, rho)
            - self.j0_at_v(v, &ge)
    }
}

struct Best {
    value: f64,
    point: Vector,
}

impl Best {
    fn new(value: f64, point: Vector) -> Self {
        Self { value, point }
    }

    fn offer(&mut self, value: f64, point: &Vector) {
        if value > self.value {
            self.value = value;
            self.point = point.clone();
        }
    }
}

fn clamp_to_ball(v: &mut Vector, center: &Vector, radius: f64) {
    let d = &*v - center;
    let nd = d.norm();
    if nd > radius {
        *v = center + d * (radius / nd);
    }
}

/// Compass search maximising `g` from `best`, kept within `‖v − center‖ ≤ radius`.
fn refine<F: Fn(&Vector) -> f64, R: Rng>(g: F, best: &mut Best, center: &Vector, radius: f64, rng: &mut R) {
    let n = center.len();
    let mut dirs: Vec<Vector> = Vec::with_capacity(4 * n);
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        dirs.push(e.clone());
        dirs.push(-e);
    }
    for _ in 0..n {
        let d = random_unit(rng, n);
        dirs.push(d.clone());
        dirs.push(-d);
    }
    let mut step = 0.25 * radius;
    let mut evals = 0;
    while step > 1e-12 * radius && evals < 4000 {
        let mut improved = false;
        for d in &dirs {
            let mut cand = &best.point + d * step;
            clamp_to_ball(&mut cand, center, radius);
            let val = g(&cand);
            evals += 1;
            if val > best.value {
                best.value = val;
                best.point = cand;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
}

/// Sampled maximisers of the state and multiplier violations.
struct ProbeOutcome {
    original: Best,
    minty: Best,
    multiplier: Best,
}

fn probe(ev: &Evaluator<'_>, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
    let inst = ev.inst;
    let (n, m) = (inst.dims.n, inst.dims.m);
    let u = ev.u;
    let big_r = ev.radius;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut original = Best::new(ev.original(u), u.clone());
    let mut minty = Best::new(ev.minty(u), u.clone());
    let visit = |v: &Vector, original: &mut Best, minty: &mut Best| {
        original.offer(ev.original(v), v);
        minty.offer(ev.minty(v), v);
    };

    visit(&Vector::zeros(n), &mut original, &mut minty);
    for i in 0..n {
        for scale in [1.0, 1e-3] {
            for sign in [-1.0, 1.0] {
                let mut v = u.clone();
                v[i] += sign * scale * big_r;
                visit(&v, &mut original, &mut minty);
            }
        }
    }
    for s in 0..cfg.samples {
        let v = match s % 3 {
            0 => random_in_ball(&mut rng, n, big_r),
            1 => u + random_in_ball(&mut rng, n, big_r * [1.0, 0.1, 0.01][(s / 3) % 3]),
            _ => u + random_unit(&mut rng, n) * (big_r * [1.0, 0.1, 0.01, 1e-4][(s / 3) % 4]),
        };
        visit(&v, &mut original, &mut minty);
    }
    // rays through the worst samples
    for base in [original.point.clone(), minty.point.clone()] {
        let d = &base - u;
        if d.norm() == 0.0 {
            continue;
        }
        for t in [0.01, 0.1, 0.5, 2.0, -0.01, -0.1, -0.5, -1.0, -2.0] {
            let mut v = u + &d * t;
            clamp_to_ball(&mut v, u, 2.0 * big_r);
            visit(&v, &mut original, &mut minty);
        }
    }
    if cfg.refine {
        refine(|v| ev.original(v), &mut original, u, 2.0 * big_r, &mut rng);
        refine(|v| ev.minty(v), &mut minty, u, 2.0 * big_r, &mut rng);
    }

    let lam = ev.lambda;
    let mut multiplier = Best::new(0.0, lam.clone());
    let offer_rho = |rho: Vector, best: &mut Best| -> Result<()> {
        let rho = inst.project_lambda(&rho)?;
        best.offer(ev.multiplier(&rho), &rho);
        Ok(())
    };
    offer_rho(Vector::zeros(m), &mut multiplier)?;
    let scale = 1.0 + lam.norm();
    let bu_norm = ev.bu.norm();
    for sigma in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
        if bu_norm > 0.0 {
            offer_rho(lam + &ev.bu * (sigma * scale / bu_norm), &mut multiplier)?;
        }
        offer_rho(lam * (1.0 + sigma), &mut multiplier)?;
    }
    if let LambdaSet::Box { upper } = &inst.lambda {
        let rho = Vector::from_fn(m, |i, _| if ev.bu[i] > 0.0 { upper[i] } else { 0.0 });
        offer_rho(rho, &mut multiplier)?;
    }
    for s in 0..(cfg.samples / 8).max(64) {
        let sigma = scale * [1e-3, 1e-2, 0.1, 1.0, 10.0][s % 5];
        offer_rho(lam + random_normal(&mut rng, m) * sigma, &mut multiplier)?;
    }
    Ok(ProbeOutcome {
        original,
        minty,
        multiplier,
    })
}

fn assemble(ev: &Evaluator<'_>, out: &ProbeOutcome, formulation: Formulation) -> FormulationResidual {
    let (v, rho) = match formulation {
        Formulation::Original | Formulation::Combined => (&out.original.point, &out.multiplier.point),
        Formulation::Minty | Formulation::MintyCombined => (&out.minty.point, &out.multiplier.point),
    };
    let violation = match formulation {
        Formulation::Original => out.original.value.max(out.multiplier.value),
        Formulation::Minty => out.minty.value.max(out.multiplier.value),
        Formulation::Combined => ev.combined_literal(v, rho),
        Formulation::MintyCombined => ev.minty_combined_literal(v, rho),
    };
    FormulationResidual {
        formulation,
        violation: violation.max(0.0),
        worst_v: v.clone(),
        worst_rho: rho.clone(),
    }
}

fn check_shapes(inst: &ProblemInstance, u: &Vector, lambda: &Vector) -> Result<()> {
    if u.len() != inst.dims.n || lambda.len() != inst.dims.m {
        return Err(Error::Shape(format!(
            "candidate has dimensions ({}, {}), expected ({}, {})",
            u.len(),
            lambda.len(),
            inst.dims.n,
            inst.dims.m
        )));
    }
    Ok(())
}

/// Worst sampled violation of one formulation at `(u, λ)`.
pub fn residual(
    inst: &ProblemInstance,
    u: &Vector,
    lambda: &Vector,
    formulation: Formulation,
    probes: &ProbeConfig,
) -> Result<FormulationResidual> {
    check_shapes(inst, u, lambda)?;
    let ev = Evaluator::new(inst, u, lambda);
    let out = probe(&ev, probes)?;
    Ok(assemble(&ev, &out, formulation))
}

/// All four residuals from one shared probe set.
pub fn all_residuals(
    inst: &ProblemInstance,
    u: &Vector,
    lambda: &Vector,
    probes: &ProbeConfig,
) -> Result<[FormulationResidual; 4]> {
    check_shapes(inst, u, lambda)?;
    let ev = Evaluator::new(inst, u, lambda);
    let out = probe(&ev, probes)?;
    Ok(Formulation::ALL.map(|f| assemble(&ev, &out, f)))
}

pub fn residual_report(
    inst: &ProblemInstance,
    u: &Vector,
    lambda: &Vector,
    probes: &ProbeConfig,
) -> Result<ResidualReport> {
    let [o, mi, c, mc] = all_residuals(inst, u, lambda, probes)?;
    Ok(ResidualReport {
        r_original: o.violation,
        r_minty: mi.violation,
        r_combined: c.violation,
        r_minty_combined: mc.violation,
        sampling: SamplingInfo {
            directions: probes.samples,
            seed: probes.seed,
            refine: probes.refine,
        },
    })
}

/// True when the four formulations agree on `(u, λ)`: all within `tol` or
/// all above it.
pub fn equivalence_check(
    inst: &ProblemInstance,
    u: &Vector,
    lambda: &Vector,
    tol: f64,
    probes: &ProbeConfig,
) -> Result<bool> {
    let res = all_residuals(inst, u, lambda, probes)?;
    let below = res.iter().filter(|r| r.violation <= tol).count();
    Ok(below == 0 || below == 4)
}
