//! Dense linear-algebra helpers shared by the solver and the verifiers.
//!
//! Everything here works on small dense problems (a few dozen unknowns at
//! most), so clarity wins over blocking or sparsity.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Largest singular value; zero for an empty matrix.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

/// Smallest eigenvalue of the symmetric part `(P + Pᵀ)/2`.
pub fn sym_min_eigenvalue(p: &Matrix) -> f64 {
    let sym = (p + p.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

pub fn dist(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm()
}

/// Solve a square system, falling back to an SVD least-squares solve when
/// LU reports singularity.
pub fn solve_square(m: &Matrix, rhs: &Vector) -> Option<Vector> {
    if let Some(x) = m.clone().lu().solve(rhs) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    least_squares(m, rhs)
}

/// Minimum-norm least-squares solution of `m x ≈ rhs`.
pub fn least_squares(m: &Matrix, rhs: &Vector) -> Option<Vector> {
    if m.ncols() == 0 {
        return Some(Vector::zeros(0));
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let eps = smax * 1e-13 * (m.nrows().max(m.ncols()) as f64);
    svd.solve(rhs, eps.max(f64::MIN_POSITIVE))
        .ok()
        .filter(|x| x.iter().all(|v| v.is_finite()))
}

pub fn random_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Uniform direction on the unit sphere of `Rⁿ`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    loop {
        let v = random_normal(rng, n);
        let nv = v.norm();
        if nv > 1e-12 {
            return v / nv;
        }
    }
}

/// Uniform sample from the closed ball of the given radius.
pub fn random_in_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Vector {
    let dir = random_unit(rng, n);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    dir * r
}

/// Minimise `½‖M ξ − r‖²` over the box `lo ≤ ξ ≤ hi` (bounded-variable
/// least squares, active-set variant). Coordinates with `lo == hi` stay fixed.
pub fn bounded_least_squares(m: &Matrix, r: &Vector, lo: &Vector, hi: &Vector) -> Vector {
    let k = m.ncols();
    let mut xi = Vector::from_fn(k, |i, _| 0.5 * (lo[i] + hi[i]));
    let free_var: Vec<bool> = (0..k).map(|i| lo[i] < hi[i]).collect();
    if !free_var.iter().any(|&f| f) {
        return xi;
    }
    let max_iter = 20 * k + 40;
    for _ in 0..max_iter {
        let resid = m * &xi - r;
        let grad = m.transpose() * &resid;
        let scale = 1.0 + r.norm() + m.norm();
        let active: Vec<usize> = (0..k)
            .filter(|&i| {
                free_var[i]
                    && !((xi[i] <= lo[i] && grad[i] > 0.0) || (xi[i] >= hi[i] && grad[i] < 0.0))
            })
            .collect();
        let kkt_ok = active.iter().all(|&i| grad[i].abs() <= 1e-14 * scale);
        if active.is_empty() || kkt_ok {
            break;
        }
        // unconstrained least squares over the active coordinates
        let mut target = r.clone();
        for j in 0..k {
            if !active.contains(&j) {
                target -= m.column(j) * xi[j];
            }
        }
        let sub = Matrix::from_fn(m.nrows(), active.len(), |row, c| m[(row, active[c])]);
        let Some(sol) = least_squares(&sub, &target) else {
            break;
        };
        let mut alpha: f64 = 1.0;
        for (c, &j) in active.iter().enumerate() {
            let d = sol[c] - xi[j];
            if d > 0.0 && xi[j] + d > hi[j] {
                alpha = alpha.min((hi[j] - xi[j]) / d);
            } else if d < 0.0 && xi[j] + d < lo[j] {
                alpha = alpha.min((lo[j] - xi[j]) / d);
            }
        }
        let mut moved = 0.0_f64;
        for (c, &j) in active.iter().enumerate() {
            let next = (xi[j] + alpha * (sol[c] - xi[j])).clamp(lo[j], hi[j]);
            moved = moved.max((next - xi[j]).abs());
            xi[j] = next;
        }
        if moved <= 1e-16 * (1.0 + xi.amax()) && alpha >= 1.0 {
            break;
        }
    }
    xi
}

/// Euclidean projection of `y` onto `{x : C x ≤ d}` with `d ≥ 0`, so that the
/// origin is a feasible starting point for the primal active-set iteration.
pub fn project_polyhedron(c: &Matrix, d: &Vector, y: &Vector) -> Result<Vector> {
    let rows = c.nrows();
    let n = y.len();
    if d.iter().any(|&di| di < 0.0) {
        return Err(Error::InfeasiblePolyhedron);
    }
    let scale = 1.0 + y.amax() + d.amax();
    let feas_tol = 1e-12 * scale;
    if (c * y - d).iter().all(|&v| v <= feas_tol) {
        return Ok(y.clone());
    }
    let mut x = Vector::zeros(n);
    let mut working: Vec<usize> = Vec::new();
    let max_iter = 50 * (rows + n + 1);
    for _ in 0..max_iter {
        let cw = Matrix::from_fn(working.len(), n, |i, j| c[(working[i], j)]);
        let g = y - &x;
        // step restricted to the null space of the working rows
        let p = if working.is_empty() {
            g.clone()
        } else {
            let gram = &cw * cw.transpose();
            let rhs = &cw * &g;
            let mu = least_squares(&gram, &rhs).unwrap_or_else(|| Vector::zeros(working.len()));
            &g - cw.transpose() * mu
        };
        if p.norm() <= 1e-14 * scale {
            if working.is_empty() {
                return Ok(x);
            }
            let mu = least_squares(&cw.transpose(), &g).unwrap_or_else(|| Vector::zeros(working.len()));
            let (imin, mmin) = mu
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            if mmin >= -1e-13 * scale {
                return Ok(x);
            }
            working.remove(imin);
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..rows {
            if working.contains(&i) {
                continue;
            }
            let cp = c.row(i).dot(&p.transpose());
            if cp > 1e-15 * scale {
                let slack = d[i] - c.row(i).dot(&x.transpose());
                let a = (slack.max(0.0)) / cp;
                if a < alpha {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        x += &p * alpha;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Ok(x)
}

/// Maximise `objᵀρ` over `{C ρ ≤ d} ∩ [−s, s]^m` by enumerating vertices.
/// Returns the maximiser and the optimal value.
pub fn lp_vertex_max(obj: &Vector, c: &Matrix, d: &Vector, s: f64) -> Result<(Vector, f64)> {
    let m = obj.len();
    if m > 8 {
        return Err(Error::DimensionLimit(format!(
            "vertex enumeration limited to m_E ≤ 8 (got {m})"
        )));
    }
    // all constraint rows: polyhedron rows followed by box faces
    let total = c.nrows() + 2 * m;
    let mut rows: Vec<Vector> = Vec::with_capacity(total);
    let mut rhs: Vec<f64> = Vec::with_capacity(total);
    for i in 0..c.nrows() {
        rows.push(c.row(i).transpose());
        rhs.push(d[i]);
    }
    for i in 0..m {
        let mut e = Vector::zeros(m);
        e[i] = 1.0;
        rows.push(e.clone());
        rhs.push(s);
        rows.push(-e);
        rhs.push(s);
    }
    let combos = binomial(total, m);
    if combos > 5.0e6 {
        return Err(Error::DimensionLimit(format!(
            "{combos} vertex candidates exceed the enumeration budget"
        )));
    }
    let tol = 1e-9 * (1.0 + s);
    let mut best: Option<(Vector, f64)> = None;
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let a = Matrix::from_fn(m, m, |i, j| rows[idx[i]][j]);
        let b = Vector::from_fn(m, |i, _| rhs[idx[i]]);
        if let Some(x) = a.clone().lu().solve(&b) {
            if x.iter().all(|v| v.is_finite())
                && rows.iter().zip(&rhs).all(|(r, &bi)| r.dot(&x) <= bi + tol)
            {
                let val = obj.dot(&x);
                if best.as_ref().is_none_or(|(_, bv)| val > *bv) {
                    best = Some((x, val));
                }
            }
        }
        if !next_combination(&mut idx, total) {
            break;
        }
    }
    best.ok_or(Error::InfeasiblePolyhedron)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bvls_matches_clamp_for_identity() {
        let m = Matrix::identity(3, 3);
        let r = Vector::from_vec(vec![2.0, -3.0, 0.5]);
        let lo = Vector::from_element(3, -1.0);
        let hi = Vector::from_element(3, 1.0);
        let xi = bounded_least_squares(&m, &r, &lo, &hi);
        for (a, b) in xi.iter().zip([1.0, -1.0, 0.5]) {
            assert!((a - b).abs() <= 1e-14, "{xi:?}");
        }
    }

    #[test]
    fn bvls_coupled_columns() {
        // min (x + y - 3)^2 with x, y in [0, 1] -> both at the upper bound
        let m = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let r = Vector::from_vec(vec![3.0]);
        let lo = Vector::zeros(2);
        let hi = Vector::from_element(2, 1.0);
        let xi = bounded_least_squares(&m, &r, &lo, &hi);
        assert!((xi[0] - 1.0).abs() < 1e-14 && (xi[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn polyhedron_projection_halfspace() {
        // x + y <= 1, project (2, 2) -> (0.5, 0.5)
        let c = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let d = Vector::from_vec(vec![1.0]);
        let p = project_polyhedron(&c, &d, &Vector::from_vec(vec![2.0, 2.0])).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-13 && (p[1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn polyhedron_projection_corner_and_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // triangle-ish cone plus a cap
        let c = Matrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 2.0]);
        let d = Vector::from_vec(vec![0.0, 0.0, 2.0]);
        for _ in 0..200 {
            let y = random_normal(&mut rng, 2) * 3.0;
            let p = project_polyhedron(&c, &d, &y).unwrap();
            assert!((&c * &p - &d).iter().all(|&v| v <= 1e-10));
            // variational inequality: (y - p)·(z - p) <= 0 for feasible z
            for _ in 0..20 {
                let z = random_normal(&mut rng, 2);
                if (&c * &z - &d).iter().all(|&v| v <= 0.0) {
                    assert!((&y - &p).dot(&(&z - &p)) <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn lp_vertex_on_box() {
        let obj = Vector::from_vec(vec![1.0, -2.0]);
        let c = Matrix::zeros(0, 2);
        let d = Vector::zeros(0);
        let (x, v) = lp_vertex_max(&obj, &c, &d, 3.0).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn lp_dimension_limit() {
        let obj = Vector::zeros(9);
        let c = Matrix::zeros(0, 9);
        let d = Vector::zeros(0);
        assert!(matches!(lp_vertex_max(&obj, &c, &d, 1.0), Err(Error::DimensionLimit(_))));
    }
}
