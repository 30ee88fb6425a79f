//! Uzawa-type outer iteration on the multiplier with a semismooth Newton
//! inner solve for the state, run inside a growing sequence of balls
//! `K(r) × Y(s)`.
//!
//! The inner problem for fixed `λ` is the inclusion
//! `f − A(u) − Bᵀλ ∈ γᵀ ∂J(γu)`. Writing `ξ ∈ ∂J(γu)` as the fixed point
//! `γu = prox_{cJ}(γu + cξ)` turns it into a piecewise-smooth square system
//! in `(u, ξ)`.

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{bounded_least_squares, lp_vertex_max, random_in_ball, solve_square, Matrix, Vector};
use crate::problem::{HFunctionSpec, LambdaSet, ProblemInstance, SolutionPair};
use crate::verify::{residual_report, ProbeConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Uzawa step `t`; derived from `c_h` and `‖B‖` when `None`.
    pub outer_step: Option<f64>,
    /// Step of the damped fixed-point fallback; derived when `None`.
    pub inner_step: Option<f64>,
    pub tol_u: f64,
    pub tol_outer: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub radii: Vec<(f64, f64)>,
    pub restarts: usize,
    /// Probe settings for the residual report attached to each solution.
    pub probes: ProbeConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_step: None,
            inner_step: None,
            tol_u: 1e-10,
            tol_outer: 1e-10,
            max_outer: 200_000,
            max_inner: 200,
            radii: default_schedule(),
            restarts: 20,
            probes: ProbeConfig::default(),
        }
    }
}

/// `r_j = s_j = 2ʲ` for `j = 0..=20`.
pub fn default_schedule() -> Vec<(f64, f64)> {
    (0..=20).map(|j| (2f64.powi(j), 2f64.powi(j))).collect()
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if self.outer_step.is_some_and(|t| !positive(t)) || self.inner_step.is_some_and(|e| !positive(e)) {
            return Err(Error::InvalidArgument("steps must be positive".into()));
        }
        if !positive(self.tol_u) || !positive(self.tol_outer) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.radii.is_empty() {
            return Err(Error::InvalidArgument("radius schedule is empty".into()));
        }
        if self
            .radii
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1))
            || self.radii.iter().any(|&(r, s)| !positive(r) || !positive(s))
        {
            return Err(Error::InvalidArgument("radius schedule must be positive and strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxOuter,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Converged => f.write_str("converged"),
            Termination::MaxOuter => f.write_str("max-outer"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub r: f64,
    pub s: f64,
    pub u_update_norm: f64,
    pub compl_residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    /// Schedule index at termination.
    pub schedule_index: usize,
}

impl SolveTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,r,s,u_update_norm,compl_residual")?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{:e},{:e}",
                row.iter, row.r, row.s, row.u_update_norm, row.compl_residual
            )?;
        }
        Ok(())
    }
}

/// Per-coordinate prox parameters `cᵢ = min(1, 0.5/ρᵢ)` with `ρᵢ` the weak
/// convexity of `jᵢ`, so that every prox is single-valued.
fn prox_params(inst: &ProblemInstance) -> Vector {
    Vector::from_iterator(
        inst.dims.k,
        inst.j.coords().iter().map(|c| {
            let rho = c.weak_convexity();
            if rho > 0.0 {
                (0.5 / rho).min(1.0)
            } else {
                1.0
            }
        }),
    )
}

struct InnerSystem<'a> {
    inst: &'a ProblemInstance,
    bt_lambda: Vector,
    c: Vector,
}

impl InnerSystem<'_> {
    /// Residual `[A(u) + γᵀξ + Bᵀλ − f ; γu − prox(γu + cξ)]` and prox slopes.
    fn eval(&self, u: &Vector, xi: &Vector) -> (Vector, Vector, Vector) {
        let inst = self.inst;
        let (n, k) = (inst.dims.n, inst.dims.k);
        let f1 = inst.apply_a(u) + inst.gamma.adjoint(xi) + &self.bt_lambda - &inst.f;
        let x = inst.gamma.apply(u);
        let mut f2 = Vector::zeros(k);
        let mut slope = Vector::zeros(k);
        for i in 0..k {
            let (y, d) = inst.j.coords()[i].prox(x[i] + self.c[i] * xi[i], self.c[i]);
            f2[i] = x[i] - y;
            slope[i] = d;
        }
        let mut f = Vector::zeros(n + k);
        f.rows_mut(0, n).copy_from(&f1);
        f.rows_mut(n, k).copy_from(&f2);
        (f, f1, slope)
    }

    fn jacobian(&self, u: &Vector, slope: &Vector) -> Matrix {
        let inst = self.inst;
        let (n, k) = (inst.dims.n, inst.dims.k);
        let g = inst.gamma.matrix();
        let mut jac = Matrix::zeros(n + k, n + k);
        jac.view_mut((0, 0), (n, n)).copy_from(&inst.a.jacobian(u));
        jac.view_mut((0, n), (n, k)).copy_from(&g.transpose());
        for i in 0..k {
            for col in 0..n {
                jac[(n + i, col)] = (1.0 - slope[i]) * g[(i, col)];
            }
            jac[(n + i, n + i)] = -slope[i] * self.c[i];
        }
        jac
    }
}

/// Subgradient closest to closing the inclusion at `u`: the box element
/// minimising `‖A(u) + γᵀξ + Bᵀλ − f‖`.
fn best_subgradient(inst: &ProblemInstance, u: &Vector, bt_lambda: &Vector) -> Vector {
    let target = &inst.f - inst.apply_a(u) - bt_lambda;
    let bx = inst.j.subgradient_box(&inst.gamma.apply(u));
    bounded_least_squares(&inst.gamma.matrix().transpose(), &target, &bx.lo, &bx.hi)
}

/// Distance from `f − A(u) − Bᵀλ` to `γᵀ ∂J(γu)`, using the box at `γu`
/// enlarged to breakpoints within `eps` (relative).
pub fn inclusion_residual(inst: &ProblemInstance, u: &Vector, lambda: &Vector, eps: f64) -> f64 {
    let target = &inst.f - inst.apply_a(u) - inst.b.b.tr_mul(lambda);
    let bx = inst.j.subgradient_box_within(&inst.gamma.apply(u), eps);
    let gt = inst.gamma.matrix().transpose();
    let xi = bounded_least_squares(&gt, &target, &bx.lo, &bx.hi);
    (&gt * xi - target).norm()
}

fn default_inner_step(inst: &ProblemInstance, radius: f64) -> f64 {
    let c_h = match inst.h {
        HFunctionSpec::PowerNorm { c_h, .. } => c_h,
        HFunctionSpec::Zero => inst.a.declared_m_a.max(1e-3),
    };
    let g2 = inst.gamma.operator_norm().powi(2);
    let slope = inst.j.max_curvature() + inst.j.coords().iter().map(|c| c.max_jump()).fold(0.0, f64::max);
    let l = inst.a.lipschitz_on_ball(radius) + g2 * slope;
    if l > 0.0 {
        0.5 * c_h / (l * l)
    } else {
        0.5
    }
}

/// Default Uzawa step `c_h/‖B‖²`, half the dual-ascent stability limit.
pub fn default_outer_step(inst: &ProblemInstance) -> f64 {
    let bn = inst.b.norm();
    let c_h = inst.h.c_h();
    if bn == 0.0 {
        1.0
    } else if c_h > 0.0 {
        c_h / (bn * bn)
    } else {
        0.1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution {
    pub u: Vector,
    pub xi: Vector,
    pub iterations: usize,
    pub residual: f64,
}

/// Solve `f − A(u) − Bᵀλ ∈ γᵀ ∂J(γu)` for `u`.
pub fn inner_solve_u(inst: &ProblemInstance, lambda: &Vector, u0: &Vector, cfg: &SolverConfig) -> Result<Vector> {
    inner_solve(inst, lambda, u0, None, cfg).map(|s| s.u)
}

/// Semismooth Newton from the given start, then from the origin; for a
/// linear operator the exact branch enumeration is the last resort.
pub fn inner_solve(
    inst: &ProblemInstance,
    lambda: &Vector,
    u0: &Vector,
    xi0: Option<&Vector>,
    cfg: &SolverConfig,
) -> Result<InnerSolution> {
    let sys = InnerSystem {
        inst,
        bt_lambda: inst.b.b.tr_mul(lambda),
        c: prox_params(inst),
    };
    let err = match newton_inner(&sys, u0, xi0, cfg) {
        Ok(s) => return Ok(s),
        Err(e @ Error::InnerDivergence { .. }) => e,
        Err(e) => return Err(e),
    };
    if u0.amax() > 0.0 {
        if let Ok(s) = newton_inner(&sys, &Vector::zeros(inst.dims.n), None, cfg) {
            return Ok(s);
        }
    }
    if inst.a.is_linear() {
        let load = &inst.f - &sys.bt_lambda;
        if let Ok(sols) = enumerate_inclusion(inst, &load) {
            if let Some((u, xi)) = sols.into_iter().next() {
                return newton_inner(&sys, &u, Some(&xi), cfg);
            }
        }
    }
    Err(err)
}

fn newton_inner(sys: &InnerSystem<'_>, u0: &Vector, xi0: Option<&Vector>, cfg: &SolverConfig) -> Result<InnerSolution> {
    let inst = sys.inst;
    let n = inst.dims.n;
    let mut u = u0.clone();
    let mut xi = match xi0 {
        Some(x) => x.clone(),
        None => best_subgradient(inst, &u, &sys.bt_lambda),
    };
    let tol = cfg.tol_u * (1.0 + inst.f.amax() + sys.bt_lambda.amax());
    let mut eta = cfg
        .inner_step
        .unwrap_or_else(|| default_inner_step(inst, u0.norm().max(1.0) * 2.0));
    let (mut f, _, mut slope) = sys.eval(&u, &xi);
    let mut merit = f.norm_squared();
    for it in 0..cfg.max_inner {
        // A warm start already within tolerance still gets one Newton step,
        // otherwise multiplier updates below `tol` would never move `u`.
        if f.amax() <= tol && (it > 0 || f.amax() <= 1e-3 * tol) {
            return Ok(InnerSolution {
                u,
                xi,
                iterations: it,
                residual: f.amax(),
            });
        }
        let jac = sys.jacobian(&u, &slope);
        let mut accepted = false;
        if let Some(step) = solve_square(&jac, &(-&f)) {
            let mut alpha = 1.0;
            while alpha > 1e-10 {
                let un = &u + step.rows(0, n) * alpha;
                let xn = &xi + step.rows(n, inst.dims.k) * alpha;
                let (fn_, _, sn) = sys.eval(&un, &xn);
                let mn = fn_.norm_squared();
                if mn <= (1.0 - 1e-4 * alpha) * merit {
                    u = un;
                    xi = xn;
                    f = fn_;
                    slope = sn;
                    merit = mn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            // damped fixed-point step with the median-projected subgradient
            let mut improved = false;
            for _ in 0..60 {
                let xi_fp = best_subgradient(inst, &u, &sys.bt_lambda);
                let g = inst.apply_a(&u) + inst.gamma.adjoint(&xi_fp) + &sys.bt_lambda - &inst.f;
                let un = &u - &g * eta;
                let xn = best_subgradient(inst, &un, &sys.bt_lambda);
                let (fn_, _, sn) = sys.eval(&un, &xn);
                let mn = fn_.norm_squared();
                if mn < merit {
                    u = un;
                    xi = xn;
                    f = fn_;
                    slope = sn;
                    merit = mn;
                    improved = true;
                    break;
                }
                eta *= 0.5;
            }
            if !improved {
                if f.amax() <= 100.0 * tol {
                    return Ok(InnerSolution {
                        u,
                        xi,
                        iterations: it,
                        residual: f.amax(),
                    });
                }
                return Err(Error::InnerDivergence {
                    iterations: it,
                    residual: f.amax(),
                });
            }
        }
    }
    if f.amax() <= tol {
        return Ok(InnerSolution {
            u,
            xi,
            iterations: cfg.max_inner,
            residual: f.amax(),
        });
    }
    Err(Error::InnerDivergence {
        iterations: cfg.max_inner,
        residual: f.amax(),
    })
}

const MAX_BRANCHES: f64 = 1e6;

/// Advance a mixed-radix counter; false once it wraps around.
pub(crate) fn next_branch(idx: &mut [usize], radix: &[usize]) -> bool {
    for (i, r) in idx.iter_mut().zip(radix) {
        *i += 1;
        if *i < *r {
            return true;
        }
        *i = 0;
    }
    false
}

/// All pairs `(u, ξ)` with `Pu + γᵀξ = load` and `ξ ∈ ∂J(γu)` for linear
/// `A`, by enumerating for each coordinate of `J` the piece or breakpoint
/// holding `(γu)ᵢ`.
pub fn enumerate_inclusion(inst: &ProblemInstance, load: &Vector) -> Result<Vec<(Vector, Vector)>> {
    if !inst.a.is_linear() {
        return Err(Error::InvalidArgument("branch enumeration needs a linear operator".into()));
    }
    let p = &inst.a.p;
    let n = inst.dims.n;
    let g = inst.gamma.matrix();
    let coords = inst.j.coords();
    // Branch `t < K` pins (γu)ᵢ to breakpoint t; `K + q` selects piece q.
    let radix: Vec<usize> = coords.iter().map(|c| 2 * c.breakpoints().len() + 1).collect();
    let branches: f64 = radix.iter().map(|&r| r as f64).product();
    if branches > MAX_BRANCHES {
        return Err(Error::DimensionLimit(format!(
            "inclusion enumeration would visit {branches:e} branches"
        )));
    }
    let scale = 1.0 + load.amax() + p.amax() + g.amax();
    let tol = 1e-9 * scale;
    let mut idx = vec![0; coords.len()];
    let mut out: Vec<(Vector, Vector)> = Vec::new();
    loop {
        let pinned: Vec<usize> = (0..coords.len())
            .filter(|&i| idx[i] < coords[i].breakpoints().len())
            .collect();
        let size = n + pinned.len();
        let mut k = Matrix::zeros(size, size);
        let mut rhs = Vector::zeros(size);
        k.view_mut((0, 0), (n, n)).copy_from(p);
        rhs.rows_mut(0, n).copy_from(load);
        for (i, c) in coords.iter().enumerate() {
            let nb = c.breakpoints().len();
            if idx[i] >= nb {
                let (slope, intercept) = c.piece_derivative(idx[i] - nb);
                let gi = g.row(i).transpose();
                let mut block = k.view_mut((0, 0), (n, n));
                block += &gi * gi.transpose() * slope;
                let mut head = rhs.rows_mut(0, n);
                head -= &gi * intercept;
            }
        }
        for (slot, &i) in pinned.iter().enumerate() {
            let gi = g.row(i);
            k.view_mut((0, n + slot), (n, 1)).copy_from(&gi.transpose());
            k.view_mut((n + slot, 0), (1, n)).copy_from(&gi);
            rhs[n + slot] = coords[i].breakpoints()[idx[i]];
        }
        if let Some(x) = solve_square(&k, &rhs) {
            let u = x.rows(0, n).into_owned();
            let gu = g * &u;
            let consistent = (&k * &x - &rhs).amax() <= tol;
            let feasible = coords.iter().enumerate().all(|(i, c)| {
                let bps = c.breakpoints();
                let nb = bps.len();
                if idx[i] < nb {
                    let slot = pinned.iter().position(|&j| j == i).unwrap_or(0);
                    let (lo, hi) = c.derivative_interval(bps[idx[i]]);
                    let xi = x[n + slot];
                    xi >= lo - tol && xi <= hi + tol
                } else {
                    let q = idx[i] - nb;
                    let lo = if q == 0 { f64::NEG_INFINITY } else { bps[q - 1] };
                    let hi = if q == nb { f64::INFINITY } else { bps[q] };
                    gu[i] >= lo - tol && gu[i] <= hi + tol
                }
            });
            if consistent && feasible && !out.iter().any(|(w, _)| (w - &u).norm() <= 1e-9) {
                let xi = Vector::from_fn(coords.len(), |i, _| {
                    let nb = coords[i].breakpoints().len();
                    if idx[i] < nb {
                        x[n + pinned.iter().position(|&j| j == i).unwrap_or(0)]
                    } else {
                        let (slope, intercept) = coords[i].piece_derivative(idx[i] - nb);
                        slope * gu[i] + intercept
                    }
                });
                out.push((u, xi));
            }
        }
        if !next_branch(&mut idx, &radix) {
            break;
        }
    }
    Ok(out)
}

/// Worst violation of `b(u, ρ − λ) ≤ 0` over `Λ`, in the closed forms for the
/// orthant and the box and by vertex enumeration on `Λ ∩ [−s, s]ᵐ` with
/// `s = ‖λ‖∞ + 1` for polyhedra.
pub fn complementarity_residual(inst: &ProblemInstance, u: &Vector, lambda: &Vector) -> Result<f64> {
    let bu = &inst.b.b * u;
    let base = lambda.dot(&bu);
    let value = match &inst.lambda {
        LambdaSet::NonnegativeOrthant => bu.iter().fold(0.0_f64, |m, &x| m.max(x)).max(base.abs()),
        LambdaSet::Box { upper } => {
            let best: f64 = bu.iter().zip(upper.iter()).map(|(&x, &g)| if x > 0.0 { g * x } else { 0.0 }).sum();
            best - base
        }
        LambdaSet::Polyhedron { c, d } => {
            let s = lambda.amax() + 1.0;
            let (_, best) = lp_vertex_max(&bu, c, d, s)?;
            best - base
        }
    };
    Ok(value.max(0.0))
}

/// `‖λ − proj_Λ(λ + t B u)‖ / t`, a cheap stationarity measure.
fn natural_residual(inst: &ProblemInstance, u: &Vector, lambda: &Vector, t: f64) -> Result<f64> {
    let p = inst.project_lambda(&(lambda + &inst.b.b * u * t))?;
    Ok((lambda - p).norm() / t)
}

fn first_index_containing(radii: &[(f64, f64)], u: &Vector, lambda: &Vector) -> usize {
    radii
        .iter()
        .position(|&(r, s)| u.norm() < r && lambda.norm() < s)
        .unwrap_or(radii.len() - 1)
}

fn retract(x: &mut Vector, radius: f64) -> bool {
    let nx = x.norm();
    if nx > radius {
        *x *= radius / nx;
        true
    } else {
        false
    }
}

/// Solve from `u0 = 0`, `λ0 = 0`.
pub fn solve(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<(SolutionPair, SolveTrace)> {
    solve_from(inst, cfg, &Vector::zeros(inst.dims.n), &Vector::zeros(inst.dims.m))
}

pub fn solve_from(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    u0: &Vector,
    lambda0: &Vector,
) -> Result<(SolutionPair, SolveTrace)> {
    cfg.validate()?;
    let t = cfg.outer_step.unwrap_or_else(|| default_outer_step(inst));
    let mut j = first_index_containing(&cfg.radii, u0, lambda0);
    let mut lambda = inst.project_lambda(lambda0)?;
    retract(&mut lambda, cfg.radii[j].1);
    let mut u = u0.clone();
    retract(&mut u, cfg.radii[j].0);
    let mut xi: Option<Vector> = None;
    let mut rows = Vec::new();
    let mut contacts = 0;
    let mut termination = Termination::MaxOuter;

    for iter in 0..cfg.max_outer {
        let (r, s) = cfg.radii[j];
        let mut lam_next = inst.project_lambda(&(&lambda + &inst.b.b * &u * t))?;
        let mut contact = retract(&mut lam_next, s);
        let inner = inner_solve(inst, &lam_next, &u, xi.as_ref(), cfg)?;
        let mut u_next = inner.u;
        contact |= retract(&mut u_next, r);
        xi = Some(inner.xi);

        let update = (&u_next - &u).norm();
        let natural = natural_residual(inst, &u_next, &lam_next, t)?;
        // The reach is the distance the verifier probes from λ: 10(1 + ‖λ‖).
        let reach = 10.0 * (1.0 + lam_next.norm());
        let cheap_ok = update <= cfg.tol_outer && natural * reach <= cfg.tol_outer;
        // the exact polyhedral value is a vertex LP, so it waits for the cheap tests
        let compl = match inst.lambda {
            LambdaSet::Polyhedron { .. } if !cheap_ok => natural,
            _ => complementarity_residual(inst, &u_next, &lam_next)?,
        };
        rows.push(TraceRow {
            iter,
            r,
            s,
            u_update_norm: update,
            compl_residual: compl,
            step: t,
        });
        u = u_next;
        lambda = lam_next;

        if contact {
            contacts += 1;
            if contacts >= 2 {
                if j + 1 >= cfg.radii.len() {
                    return Err(Error::ScheduleExhausted { r, s });
                }
                j += 1;
                contacts = 0;
            }
            continue;
        }
        contacts = 0;
        if cheap_ok && compl <= cfg.tol_outer {
            termination = Termination::Converged;
            break;
        }
    }
    let residuals = residual_report(inst, &u, &lambda, &cfg.probes)?;
    Ok((
        SolutionPair { u, lambda, residuals },
        SolveTrace {
            rows,
            termination,
            schedule_index: j,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UniquenessVerdict {
    Consistent,
    Inconsistent,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniquenessReport {
    pub verdict: UniquenessVerdict,
    pub u_spread: f64,
    pub lambda_spread: f64,
    pub solutions: Vec<SolutionPair>,
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

/// Solve from `cfg.restarts` random starting points and measure the spread
/// of the states and of the multipliers.
pub fn multi_start(inst: &ProblemInstance, cfg: &SolverConfig, seed: u64) -> Result<UniquenessReport> {
    if !matches!(inst.h, HFunctionSpec::PowerNorm { .. }) {
        return Ok(UniquenessReport {
            verdict: UniquenessVerdict::NotApplicable,
            u_spread: f64::NAN,
            lambda_spread: f64::NAN,
            solutions: Vec::new(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solutions = Vec::with_capacity(cfg.restarts);
    for _ in 0..cfg.restarts.max(1) {
        let u0 = random_in_ball(&mut rng, inst.dims.n, 10.0);
        let l0 = inst.project_lambda(&random_in_ball(&mut rng, inst.dims.m, 10.0))?;
        let (sol, trace) = solve_from(inst, cfg, &u0, &l0)?;
        if trace.termination != Termination::Converged {
            return Err(Error::InnerDivergence {
                iterations: cfg.max_outer,
                residual: trace.rows.last().map_or(f64::NAN, |r| r.compl_residual),
            });
        }
        solutions.push(sol);
    }
    let us: Vec<&Vector> = solutions.iter().map(|s| &s.u).collect();
    let ls: Vec<&Vector> = solutions.iter().map(|s| &s.lambda).collect();
    let u_spread = max_pairwise(&us);
    let lambda_spread = max_pairwise(&ls);
    let verdict = if u_spread <= 10.0 * cfg.tol_outer {
        UniquenessVerdict::Consistent
    } else {
        UniquenessVerdict::Inconsistent
    };
    Ok(UniquenessReport {
        verdict,
        u_spread,
        lambda_spread,
        solutions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::nonsmooth::{CoordinateFunction, PiecewiseC1Spec};
    use crate::problem::{BilinearFormSpec, GammaSpec, HypothesisProfile, OperatorSpec};
    use crate::verify::CERT_TOL;

    fn kink_instance(f: f64) -> ProblemInstance {
        ProblemInstance::new(
            OperatorSpec::linear(Matrix::from_element(1, 1, 2.0), 2.0),
            PiecewiseC1Spec::uniform(1, CoordinateFunction::kink(1.0, -0.5)),
            GammaSpec::new(Matrix::identity(1, 1)),
            BilinearFormSpec { b: Matrix::identity(1, 1) },
            LambdaSet::NonnegativeOrthant,
            Vector::from_element(1, f),
            HFunctionSpec::power(1.5, 2.0).unwrap(),
            HypothesisProfile::declared(2.0, 0.0, 0.5, 0.5).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn kink_instance_lands_in_multiplier_interval() {
        let (sol, trace) = solve(&kink_instance(3.0), &SolverConfig::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert!(sol.u[0].abs() < 1e-10, "{}", sol.u);
        assert!((2.0 - 1e-9..=4.0 + 1e-9).contains(&sol.lambda[0]), "{}", sol.lambda);
        assert!(sol.residuals.certified(CERT_TOL), "{:?}", sol.residuals);
    }

    #[test]
    fn negative_load_leaves_contact() {
        let (sol, _) = solve(&kink_instance(-2.0), &SolverConfig::default()).unwrap();
        assert!((sol.u[0] + 2.0 / 3.0).abs() < 1e-9);
        assert!(sol.lambda[0].abs() < 1e-9);
    }

    #[test]
    fn inner_solve_matches_closed_form() {
        let inst = kink_instance(3.0);
        // 3 − 2u − λ ∈ ∂j(u) with λ = 5 gives −2 − 2u = −1 − u/2, so u = −2/3.
        let s = inner_solve(&inst, &Vector::from_element(1, 5.0), &Vector::zeros(1), None, &SolverConfig::default())
            .unwrap();
        assert!((s.u[0] + 2.0 / 3.0).abs() < 1e-12, "{}", s.u);
        assert!(inclusion_residual(&inst, &s.u, &Vector::from_element(1, 5.0), 1e-9) < 1e-10);
    }

    #[test]
    fn restarts_agree_on_state_but_not_multiplier() {
        let cfg = SolverConfig {
            restarts: 8,
            ..SolverConfig::default()
        };
        let rep = multi_start(&kink_instance(3.0), &cfg, 7).unwrap();
        assert_eq!(rep.verdict, UniquenessVerdict::Consistent);
        assert!(rep.u_spread <= 1e-9);
        assert!(rep.lambda_spread >= 0.5, "{}", rep.lambda_spread);
    }

    #[test]
    fn box_and_polyhedron_multipliers() {
        let mut inst = kink_instance(6.0);
        inst.lambda = LambdaSet::boxed(Vector::from_element(1, 1.0)).unwrap();
        let (sol, _) = solve(&inst, &SolverConfig::default()).unwrap();
        // λ saturates at 1: 6 − 2u − 1 = 1 − u/2 gives u = 8/3.
        // The half-line ρ ≤ 1 has the same maximiser since Bu > 0.
        assert!((sol.u[0] - 8.0 / 3.0).abs() < 1e-9, "{}", sol.u);
        assert!((sol.lambda[0] - 1.0).abs() < 1e-12);
        inst.lambda = LambdaSet::polyhedron(Matrix::from_element(1, 1, 1.0), Vector::from_element(1, 1.0)).unwrap();
        let (sol, trace) = solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert!((sol.u[0] - 8.0 / 3.0).abs() < 1e-9, "{}", sol.u);
        assert!((sol.lambda[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn complementarity_residual_closed_forms() {
        let inst = kink_instance(3.0);
        let r = complementarity_residual(&inst, &Vector::from_element(1, 0.5), &Vector::from_element(1, 2.0)).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        let r = complementarity_residual(&inst, &Vector::from_element(1, -0.5), &Vector::zeros(1)).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn trace_csv_has_header() {
        let (_, trace) = solve(&kink_instance(3.0), &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,r,s,u_update_norm,compl_residual\n"));
        assert_eq!(text.lines().count(), trace.rows.len() + 1);
    }
}
