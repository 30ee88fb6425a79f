//! Grid oracle over `K(r) × (Λ ∩ Y(s))` for very small instances.
//!
//! For a grid point `(u, λ)` the combined violation splits into a state part
//! and a multiplier part. The state part is maximised exactly over the whole
//! ball `K(r)`: the violation `min_ξ ⟨g − γᵀξ, v − u⟩` is bilinear in
//! `(v, ξ)` over compact convex sets, so its max-min equals
//! `min_ξ [r‖g − γᵀξ‖ − ⟨g − γᵀξ, u⟩]` with `g = f − Au − Bᵀλ`. The
//! multiplier part is maximised over the grid points of `Λ ∩ Y(s)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{bounded_least_squares, Matrix, Vector};
use crate::nonsmooth::SubgradientBox;
use crate::problem::ProblemInstance;

/// Largest number of candidate grid points the oracle will enumerate.
pub const ORACLE_BUDGET: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// Accepted grid points `(u, λ, violation)`.
    pub points: Vec<(Vector, Vector, f64)>,
    pub tol: f64,
    pub grid_points: usize,
    /// Some accepted point sits within one grid step of the ball boundary.
    pub boundary_touching: bool,
    /// Grid point of least violation, accepted or not.
    pub best: Option<(Vector, Vector, f64)>,
}

impl OracleResult {
    /// Distance from `u` to the nearest accepted state.
    pub fn distance_to_cluster(&self, u: &Vector) -> f64 {
        self.points
            .iter()
            .map(|(p, _, _)| (p - u).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Componentwise extent of the accepted multipliers.
    pub fn lambda_range(&self, i: usize) -> Option<(f64, f64)> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, l, _)| {
            (lo.min(l[i]), hi.max(l[i]))
        }))
    }

    pub fn u_range(&self, i: usize) -> Option<(f64, f64)> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (u, _, _)| {
            (lo.min(u[i]), hi.max(u[i]))
        }))
    }
}

/// Modulus-of-continuity bound for the combined violation at step `δ`:
/// a grid point within `δ√(n+m)` of a true solution (away from kink jumps)
/// violates by at most this much.
pub fn oracle_tolerance(inst: &ProblemInstance, r: f64, s: f64, delta: f64) -> f64 {
    let (n, m) = (inst.dims.n, inst.dims.m);
    let a_lip = inst.a.lipschitz_on_ball(r);
    let q = inst.j.max_curvature();
    let g2 = inst.gamma.operator_norm().powi(2);
    let bn = inst.b.norm();
    delta * ((n + m) as f64).sqrt() * ((a_lip + g2 * q + bn) * 2.0 * r + bn * 2.0 * s)
}

/// Integer multiples of `delta` inside `[−radius, radius]ᵈ ∩ ball(radius)`,
/// filtered by `keep`.
fn grid(dim: usize, radius: f64, delta: f64, keep: impl Fn(&Vector) -> bool) -> Vec<Vector> {
    let steps = (radius / delta + 1e-9).floor() as i64;
    let mut idx = vec![-steps; dim];
    let mut out = Vec::new();
    loop {
        let p = Vector::from_fn(dim, |i, _| idx[i] as f64 * delta);
        if p.norm() <= radius * (1.0 + 1e-12) && keep(&p) {
            out.push(p);
        }
        let mut c = 0;
        loop {
            if c == dim {
                return out;
            }
            idx[c] += 1;
            if idx[c] <= steps {
                break;
            }
            idx[c] = -steps;
            c += 1;
        }
    }
}

/// Orthonormal basis of the column space of `a`.
fn range_basis(a: &Matrix) -> Matrix {
    if a.ncols() == 0 {
        return Matrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let smax = svd.singular_values.max();
    let cut = smax * 1e-12 * a.nrows().max(a.ncols()) as f64;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > cut)
        .collect();
    Matrix::from_fn(a.nrows(), keep.len(), |row, c| u[(row, keep[c])])
}

fn golden_min(lo: f64, hi: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if g(c) <= g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// `min_{ξ ∈ box} r‖g − γᵀξ‖ − ⟨g − γᵀξ, u⟩`, or any value above `skip`
/// once the minimum is known to exceed it.
fn state_violation(gt: &Matrix, g: &Vector, u: &Vector, r: f64, bx: &SubgradientBox, skip: f64) -> f64 {
    let phi = |xi: &Vector| {
        let e = g - gt * xi;
        r * e.norm() - e.dot(u)
    };
    let free = bx.free_coords();
    if free.is_empty() {
        return phi(&bx.lo);
    }
    let mut xi = bounded_least_squares(gt, g, &bx.lo, &bx.hi);
    // φ ≥ (r − ‖u‖) min‖e‖ over the box
    let lb = (r - u.norm()).max(0.0) * (g - gt * &xi).norm() * (1.0 - 1e-9);
    if lb > skip {
        return lb;
    }
    let mut best = phi(&xi);
    let mut e = g - gt * &xi;
    for _ in 0..20 {
        let before = best;
        for &i in &free {
            // along coordinate i, e moves to e + c·(ξᵢ − t)
            let c = gt.column(i);
            let (ee, ec, cc) = (e.norm_squared(), e.dot(&c), c.norm_squared());
            let (eu, cu) = (e.dot(u), c.dot(u));
            let line = |t: f64| {
                let sft = xi[i] - t;
                r * (ee + 2.0 * sft * ec + sft * sft * cc).max(0.0).sqrt() - (eu + sft * cu)
            };
            let t = golden_min(bx.lo[i], bx.hi[i], line);
            let val = line(t);
            if val < best {
                best = val;
                e += c * (xi[i] - t);
                xi[i] = t;
            }
        }
        if before - best <= 1e-15 * (1.0 + best.abs()) {
            break;
        }
    }
    // re-evaluate directly to shed drift from the incremental updates
    phi(&xi)
}

/// Enumerate the grid and keep every point whose combined violation is at
/// most `tol`.
pub fn brute_force_oracle(inst: &ProblemInstance, r: f64, s: f64, delta: f64, tol: f64) -> Result<OracleResult> {
    let (n, m) = (inst.dims.n, inst.dims.m);
    if n + m > 4 {
        return Err(Error::DimensionLimit(format!("oracle needs n + m <= 4, got {}", n + m)));
    }
    if !(delta > 0.0 && r > 0.0 && s > 0.0) {
        return Err(Error::InvalidArgument("oracle needs positive r, s and delta".into()));
    }
    let box_count = |radius: f64, dim: usize| (2.0 * (radius / delta + 1e-9).floor() + 1.0).powi(dim as i32);
    let (bu_count, bl_count) = (box_count(r, n), box_count(s, m));
    if bu_count > ORACLE_BUDGET || bl_count > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded {
            points: bu_count * bl_count,
            budget: ORACLE_BUDGET,
        });
    }
    let us = grid(n, r, delta, |_| true);
    let lams = grid(m, s, delta, |l| inst.lambda.contains(l, 1e-12));
    let total = us.len() as f64 * lams.len() as f64;
    if total > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded {
            points: total,
            budget: ORACLE_BUDGET,
        });
    }
    let gt = inst.gamma.matrix().transpose();
    let bt_lams: Vec<Vector> = lams.iter().map(|l| inst.b.b.tr_mul(l)).collect();
    let bt = inst.b.b.transpose();
    let mut bases: HashMap<Vec<usize>, Matrix> = HashMap::new();
    // Per state: the part of g that no free ξ or any λ can cancel.
    let state = |u: &Vector| {
        let g0 = &inst.f - inst.apply_a(u);
        let mut bx = inst.j.subgradient_box(&inst.gamma.apply(u));
        // a ξ coordinate that γᵀ ignores has no effect on the violation
        for i in bx.free_coords() {
            if gt.column(i).amax() == 0.0 {
                bx.hi[i] = bx.lo[i];
            }
        }
        let free = bx.free_coords();
        let fixed = Vector::from_fn(bx.dim(), |i, _| if free.contains(&i) { 0.0 } else { bx.lo[i] });
        let shift = &g0 - &gt * fixed;
        (g0, bx, free, shift)
    };
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(us.len());
    for (i, u) in us.iter().enumerate() {
        let (_, _, free, shift) = state(u);
        let basis = bases.entry(free.clone()).or_insert_with(|| {
            let cols: Vec<Vector> = free.iter().map(|&c| gt.column(c).into_owned()).collect();
            let mut span = Matrix::zeros(n, cols.len() + m);
            for (c, col) in cols.iter().enumerate() {
                span.set_column(c, col);
            }
            span.view_mut((0, cols.len()), (n, m)).copy_from(&bt);
            range_basis(&span)
        });
        let left = &shift - &*basis * basis.tr_mul(&shift);
        // r‖e‖ − ⟨e, u⟩ ≥ (r − ‖u‖)‖e‖, and ‖e‖ is at least the unreachable part.
        let lb = (r - u.norm()).max(0.0) * left.norm() * (1.0 - 1e-9) - 1e-12 * (1.0 + shift.norm());
        order.push((lb, i));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points = Vec::new();
    let (mut best_v, mut best_at) = (f64::INFINITY, None);
    let mut boundary_touching = false;
    for &(lb, i) in &order {
        if lb > tol && lb >= best_v {
            break;
        }
        let u = &us[i];
        let (g0, bx, free, shift) = state(u);
        let degenerate = free.is_empty();
        let bu = &inst.b.b * u;
        let ascent = lams.iter().map(|l| l.dot(&bu)).fold(f64::NEG_INFINITY, f64::max);
        for (lam, btl) in lams.iter().zip(&bt_lams) {
            let v2 = ascent - lam.dot(&bu);
            let v1 = if degenerate {
                let (mut sq, mut dot) = (0.0, 0.0);
                for ((&a, &b), &x) in shift.iter().zip(btl.iter()).zip(u.iter()) {
                    let e = a - b;
                    sq += e * e;
                    dot += e * x;
                }
                r * sq.sqrt() - dot
            } else {
                state_violation(&gt, &(&g0 - btl), u, r, &bx, tol.max(best_v))
            };
            let v = v1.max(0.0) + v2.max(0.0);
            if v < best_v {
                best_v = v;
                best_at = Some((u, lam));
            }
            if v <= tol {
                if u.norm() >= r - delta || lam.norm() >= s - delta {
                    boundary_touching = true;
                }
                points.push((u.clone(), lam.clone(), v));
            }
        }
    }
    let best = best_at.map(|(u, l): (&Vector, &Vector)| (u.clone(), l.clone(), best_v));
    Ok(OracleResult {
        points,
        tol,
        grid_points: us.len() * lams.len(),
        boundary_touching,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonsmooth::{CoordinateFunction, PiecewiseC1Spec};
    use crate::problem::{BilinearFormSpec, GammaSpec, HFunctionSpec, HypothesisProfile, LambdaSet, OperatorSpec};

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
    fn kink_cluster_covers_multiplier_interval() {
        let res = brute_force_oracle(&kink_instance(3.0), 5.0, 5.0, 0.01, 0.05).unwrap();
        let (ulo, uhi) = res.u_range(0).unwrap();
        assert!(ulo >= -0.01 - 1e-12 && uhi <= 0.01 + 1e-12, "{ulo} {uhi}");
        let (llo, lhi) = res.lambda_range(0).unwrap();
        assert!(llo >= 1.95 - 1e-9 && llo <= 2.0 + 1e-9, "{llo}");
        assert!(lhi <= 4.05 + 1e-9 && lhi >= 4.0 - 1e-9, "{lhi}");
        assert!(!res.boundary_touching);
    }

    #[test]
    fn negative_load_cluster() {
        let res = brute_force_oracle(&kink_instance(-2.0), 5.0, 5.0, 0.01, 0.05).unwrap();
        assert!(!res.points.is_empty());
        assert!(res.distance_to_cluster(&Vector::from_element(1, -2.0 / 3.0)) <= 0.01);
        for (u, l, _) in &res.points {
            assert!((u[0] + 2.0 / 3.0).abs() <= 0.05, "{u}");
            assert!(l[0] <= 0.08);
        }
    }

    #[test]
    fn zero_b_leaves_multiplier_free() {
        let mut inst = kink_instance(3.0);
        inst.b = BilinearFormSpec { b: Matrix::zeros(1, 1) };
        let res = brute_force_oracle(&inst, 5.0, 5.0, 0.01, 0.05).unwrap();
        assert!(res.boundary_touching);
    }

    #[test]
    fn budget_and_dimension_limits() {
        let inst = kink_instance(3.0);
        assert!(matches!(
            brute_force_oracle(&inst, 5.0, 5.0, 1e-5, 0.1),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
