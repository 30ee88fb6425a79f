//! Clarke calculus for separable, piecewise-smooth functions `J(x) = Σ jᵢ(xᵢ)`.
//!
//! Each coordinate function `jᵢ` is continuous with finitely many breakpoints
//! and a quadratic primitive on every piece, so one-sided derivatives are
//! available in closed form. The generalized gradient is represented by the
//! box `∏ [loᵢ, hiᵢ]` of one-sided derivative hulls and the generalized
//! directional derivative `J⁰(x; d)` by the support function of that box.
//! Breakpoints are detected by exact comparison; the `*_within` variants use
//! a Goldstein-style enlargement for points that sit within roundoff of a kink.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_in_ball, random_normal, Vector};

/// Floor used for `β_J` when the sampled growth is nonpositive.
pub const MIN_BETA: f64 = 1e-12;

/// A smooth primitive used on one piece.
///
/// `abs` pieces carry a kink `w·|x − at|`; `at` must coincide with one of the
/// breakpoints so the piece stays smooth on its open interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Piece {
    Affine {
        a: f64,
        b: f64,
    },
    Quad {
        q: f64,
        a: f64,
        b: f64,
    },
    Abs {
        w: f64,
        at: f64,
        #[serde(default)]
        q: f64,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
    },
}

/// `q x²/2 + a x + c`: the normalized form of a piece on its interval.
#[derive(Clone, Copy, Debug, PartialEq)]
struct QuadForm {
    q: f64,
    a: f64,
    c: f64,
}

impl QuadForm {
    fn value(&self, x: f64) -> f64 {
        0.5 * self.q * x * x + self.a * x + self.c
    }

    fn deriv(&self, x: f64) -> f64 {
        self.q * x + self.a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoordinate {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

/// One coordinate function `jᵢ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoordinate", into = "RawCoordinate")]
pub struct CoordinateFunction {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
    forms: Vec<QuadForm>,
}

impl TryFrom<RawCoordinate> for CoordinateFunction {
    type Error = Error;

    fn try_from(raw: RawCoordinate) -> Result<Self> {
        CoordinateFunction::new(raw.breakpoints, raw.pieces)
    }
}

impl From<CoordinateFunction> for RawCoordinate {
    fn from(c: CoordinateFunction) -> Self {
        RawCoordinate {
            breakpoints: c.breakpoints,
            pieces: c.pieces,
        }
    }
}

impl CoordinateFunction {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::Parse("breakpoints must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("breakpoints must be strictly increasing".into()));
        }
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::Shape(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        let mut forms = Vec::with_capacity(pieces.len());
        for (p, piece) in pieces.iter().enumerate() {
            let (lo, hi) = interval(&breakpoints, p);
            let form = match *piece {
                Piece::Affine { a, b } => QuadForm { q: 0.0, a, c: b },
                Piece::Quad { q, a, b } => QuadForm { q, a, c: b },
                Piece::Abs { w, at, q, a, b } => {
                    if !breakpoints.contains(&at) {
                        return Err(Error::Parse(format!(
                            "abs kink at {at} does not coincide with a breakpoint"
                        )));
                    }
                    // on this piece |x - at| has a fixed sign
                    let sign = if at <= lo { 1.0 } else if at >= hi { -1.0 } else { 0.0 };
                    QuadForm {
                        q,
                        a: a + sign * w,
                        c: b - sign * w * at,
                    }
                }
            };
            if [form.q, form.a, form.c].iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse("piece parameters must be finite".into()));
            }
            forms.push(form);
        }
        for (i, &b) in breakpoints.iter().enumerate() {
            let left = forms[i].value(b);
            let right = forms[i + 1].value(b);
            if (left - right).abs() > 1e-12 * (1.0 + left.abs().max(right.abs())) {
                return Err(Error::Parse(format!(
                    "discontinuity at breakpoint {b}: {left} vs {right}"
                )));
            }
        }
        Ok(Self {
            breakpoints,
            pieces,
            forms,
        })
    }

    pub fn zero() -> Self {
        Self::new(vec![], vec![Piece::Affine { a: 0.0, b: 0.0 }]).expect("valid")
    }

    /// `q x²/2 + a x + b` without breakpoints.
    pub fn quadratic(q: f64, a: f64, b: f64) -> Self {
        Self::new(vec![], vec![Piece::Quad { q, a, b }]).expect("valid")
    }

    /// `w |x| + q x²/2`, the kink sitting at the origin.
    pub fn kink(w: f64, q: f64) -> Self {
        let piece = Piece::Abs {
            w,
            at: 0.0,
            q,
            a: 0.0,
            b: 0.0,
        };
        Self::new(vec![0.0], vec![piece.clone(), piece]).expect("valid")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.forms.iter().all(|f| f.q == 0.0 && f.a == 0.0 && f.c == 0.0)
    }

    fn piece_at(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.forms[self.piece_at(x)].value(x)
    }

    /// One-sided derivatives `(j′(b⁻), j′(b⁺))` at breakpoint index `i`.
    fn one_sided(&self, i: usize) -> (f64, f64) {
        let b = self.breakpoints[i];
        (self.forms[i].deriv(b), self.forms[i + 1].deriv(b))
    }

    /// `(slope, intercept)` of the affine derivative on piece `p`, which
    /// spans the open interval between breakpoints `p − 1` and `p`.
    pub fn piece_derivative(&self, p: usize) -> (f64, f64) {
        (self.forms[p].q, self.forms[p].a)
    }

    /// Interval hull of the limiting derivatives at `x`.
    pub fn derivative_interval(&self, x: f64) -> (f64, f64) {
        // `+ 0.0` maps −0.0 to 0.0 so a signed zero still hits a breakpoint at 0
        match self.breakpoints.binary_search_by(|b| (b + 0.0).total_cmp(&(x + 0.0))) {
            Ok(i) => {
                let (l, r) = self.one_sided(i);
                (l.min(r), l.max(r))
            }
            Err(p) => {
                let d = self.forms[p].deriv(x);
                (d, d)
            }
        }
    }

    /// Like [`derivative_interval`](Self::derivative_interval) but treats any
    /// breakpoint within `eps·max(1, |b|)` of `x` as active.
    pub fn derivative_interval_within(&self, x: f64, eps: f64) -> (f64, f64) {
        let (mut lo, mut hi) = self.derivative_interval(x);
        for (i, &b) in self.breakpoints.iter().enumerate() {
            if (x - b).abs() <= eps * b.abs().max(1.0) {
                let (l, r) = self.one_sided(i);
                lo = lo.min(l).min(r);
                hi = hi.max(l).max(r);
            }
        }
        (lo, hi)
    }

    /// Maximum of `|j′|` over `[x − radius, x + radius]`.
    pub fn lipschitz_near(&self, x: f64, radius: f64) -> f64 {
        let (a, b) = (x - radius, x + radius);
        let mut best = 0.0_f64;
        for (p, form) in self.forms.iter().enumerate() {
            let (lo, hi) = interval(&self.breakpoints, p);
            let s = a.max(lo);
            let e = b.min(hi);
            if s <= e {
                best = best.max(form.deriv(s).abs()).max(form.deriv(e).abs());
            }
        }
        best
    }

    /// Largest negative curvature `max(0, −q)` over all pieces.
    pub fn weak_convexity(&self) -> f64 {
        self.forms.iter().fold(0.0_f64, |m, f| m.max(-f.q))
    }

    /// True when every kink is convex (`j′(b⁻) ≤ j′(b⁺)`).
    pub fn kinks_convex(&self) -> bool {
        (0..self.breakpoints.len()).all(|i| {
            let (l, r) = self.one_sided(i);
            l <= r
        })
    }

    /// Largest curvature magnitude over all pieces.
    pub fn max_curvature(&self) -> f64 {
        self.forms.iter().fold(0.0_f64, |m, f| m.max(f.q.abs()))
    }

    /// Largest one-sided slope jump over all breakpoints.
    pub fn max_jump(&self) -> f64 {
        (0..self.breakpoints.len()).fold(0.0_f64, |m, i| {
            let (l, r) = self.one_sided(i);
            m.max((r - l).abs())
        })
    }

    /// Growth exponent of `−x·j′(x)` as `|x| → ∞`: 2 for negative tail
    /// curvature, 1 for positive linear growth, 0 when bounded above.
    pub fn tail_growth_exponent(&self) -> u32 {
        let last = self.forms[self.forms.len() - 1];
        let first = self.forms[0];
        let right = if last.q < 0.0 {
            2
        } else if last.q == 0.0 && last.a < 0.0 {
            1
        } else {
            0
        };
        let left = if first.q < 0.0 {
            2
        } else if first.q == 0.0 && first.a > 0.0 {
            1
        } else {
            0
        };
        right.max(left)
    }

    /// Proximal map of `c·j` and its derivative with respect to `z`.
    ///
    /// Requires `1 + c·q > 0` on every piece; for convex kinks the result is
    /// then unique and piecewise linear in `z`.
    pub fn prox(&self, z: f64, c: f64) -> (f64, f64) {
        for i in 0..self.breakpoints.len() {
            let b = self.breakpoints[i];
            let (l, r) = self.one_sided(i);
            if l <= r && b + c * l <= z && z <= b + c * r {
                return (b, 0.0);
            }
        }
        for (p, f) in self.forms.iter().enumerate() {
            let (lo, hi) = interval(&self.breakpoints, p);
            let den = 1.0 + c * f.q;
            if den <= 0.0 {
                continue;
            }
            let y = (z - c * f.a) / den;
            if lo < y && y < hi {
                return (y, 1.0 / den);
            }
        }
        // roundoff at a piece boundary or a non-convex kink: minimise directly
        let objective = |y: f64| self.value(y) + (y - z) * (y - z) / (2.0 * c);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for &b in &self.breakpoints {
            let v = objective(b);
            if v < best.0 {
                best = (v, b, 0.0);
            }
        }
        for (p, f) in self.forms.iter().enumerate() {
            let (lo, hi) = interval(&self.breakpoints, p);
            let den = 1.0 + c * f.q;
            if den <= 0.0 {
                continue;
            }
            let y = ((z - c * f.a) / den).clamp(lo, hi);
            let v = objective(y);
            if v < best.0 {
                best = (v, y, 1.0 / den);
            }
        }
        (best.1, best.2)
    }
}

fn interval(breakpoints: &[f64], p: usize) -> (f64, f64) {
    let lo = if p == 0 { f64::NEG_INFINITY } else { breakpoints[p - 1] };
    let hi = if p == breakpoints.len() { f64::INFINITY } else { breakpoints[p] };
    (lo, hi)
}

/// Box `∏ [loᵢ, hiᵢ]` representing the generalized gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgradientBox {
    pub lo: Vector,
    pub hi: Vector,
}

impl SubgradientBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// `max_{ξ ∈ box} ⟨ξ, d⟩`.
    pub fn support(&self, d: &Vector) -> f64 {
        (0..self.dim())
            .map(|i| (self.lo[i] * d[i]).max(self.hi[i] * d[i]))
            .sum()
    }

    /// Vertex attaining the support value in direction `d`.
    pub fn argmax_vertex(&self, d: &Vector) -> Vector {
        Vector::from_fn(self.dim(), |i, _| if d[i] > 0.0 { self.hi[i] } else { self.lo[i] })
    }

    pub fn contains(&self, xi: &Vector) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= xi[i] && xi[i] <= self.hi[i])
    }

    /// Componentwise clamp (median of `lo`, `ξ`, `hi`).
    pub fn project(&self, xi: &Vector) -> Vector {
        Vector::from_fn(self.dim(), |i, _| xi[i].clamp(self.lo[i], self.hi[i]))
    }

    pub fn is_degenerate(&self) -> bool {
        (0..self.dim()).all(|i| self.lo[i] == self.hi[i])
    }

    /// Indices where the box has positive width.
    pub fn free_coords(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.lo[i] < self.hi[i]).collect()
    }

    /// All vertices, enumerated over the nondegenerate coordinates only.
    pub fn vertices(&self) -> Vec<Vector> {
        let free = self.free_coords();
        let mut out = Vec::with_capacity(1 << free.len());
        for mask in 0..(1usize << free.len()) {
            let mut v = self.lo.clone();
            for (bit, &i) in free.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    v[i] = self.hi[i];
                }
            }
            out.push(v);
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        Vector::from_fn(self.dim(), |i, _| {
            self.lo[i] + (self.hi[i] - self.lo[i]) * rng.random::<f64>()
        })
    }
}

/// Separable piecewise-C¹ function `J: Rᵏ → R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PiecewiseC1Spec {
    coords: Vec<CoordinateFunction>,
}

impl PiecewiseC1Spec {
    pub fn new(coords: Vec<CoordinateFunction>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Shape("J needs at least one coordinate".into()));
        }
        Ok(Self { coords })
    }

    pub fn zero(k: usize) -> Self {
        Self {
            coords: vec![CoordinateFunction::zero(); k],
        }
    }

    pub fn uniform(k: usize, c: CoordinateFunction) -> Self {
        Self { coords: vec![c; k] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[CoordinateFunction] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(CoordinateFunction::is_zero)
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.coords.iter().zip(x.iter()).map(|(c, &xi)| c.value(xi)).sum()
    }

    pub fn subgradient_box(&self, x: &Vector) -> SubgradientBox {
        let (lo, hi): (Vec<f64>, Vec<f64>) = self
            .coords
            .iter()
            .zip(x.iter())
            .map(|(c, &xi)| c.derivative_interval(xi))
            .unzip();
        SubgradientBox {
            lo: Vector::from_vec(lo),
            hi: Vector::from_vec(hi),
        }
    }

    pub fn subgradient_box_within(&self, x: &Vector, eps: f64) -> SubgradientBox {
        let (lo, hi): (Vec<f64>, Vec<f64>) = self
            .coords
            .iter()
            .zip(x.iter())
            .map(|(c, &xi)| c.derivative_interval_within(xi, eps))
            .unzip();
        SubgradientBox {
            lo: Vector::from_vec(lo),
            hi: Vector::from_vec(hi),
        }
    }

    /// `J⁰(x; d)`: support function of the subgradient box.
    pub fn clarke_dir(&self, x: &Vector, d: &Vector) -> f64 {
        self.subgradient_box(x).support(d)
    }

    pub fn clarke_dir_within(&self, x: &Vector, d: &Vector, eps: f64) -> f64 {
        self.subgradient_box_within(x, eps).support(d)
    }

    /// Euclidean Lipschitz bound of `J` on the cube of half-width `radius`
    /// around `x`.
    pub fn lipschitz_estimate(&self, x: &Vector, radius: f64) -> f64 {
        self.coords
            .iter()
            .zip(x.iter())
            .map(|(c, &xi)| c.lipschitz_near(xi, radius).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Relaxed-monotonicity constant `m_J` of the box subdifferential, or
    /// infinity when some kink is concave.
    pub fn relaxed_monotonicity_constant(&self) -> f64 {
        if self.coords.iter().all(CoordinateFunction::kinks_convex) {
            self.coords.iter().fold(0.0_f64, |m, c| m.max(c.weak_convexity()))
        } else {
            f64::INFINITY
        }
    }

    pub fn max_curvature(&self) -> f64 {
        self.coords.iter().fold(0.0_f64, |m, c| m.max(c.max_curvature()))
    }

    pub fn tail_growth_exponent(&self) -> u32 {
        self.coords.iter().map(|c| c.tail_growth_exponent()).max().unwrap_or(0)
    }

    fn breakpoint_scale(&self) -> f64 {
        self.coords
            .iter()
            .flat_map(|c| c.breakpoints.iter())
            .fold(0.0_f64, |m, b| m.max(b.abs()))
    }

    /// Random point that lands exactly on breakpoints with probability ~0.3
    /// per coordinate.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, radius: f64) -> Vector {
        Vector::from_fn(self.dim(), |i, _| {
            let bps = &self.coords[i].breakpoints;
            if !bps.is_empty() && rng.random::<f64>() < 0.3 {
                bps[rng.random_range(0..bps.len())]
            } else {
                radius * (2.0 * rng.random::<f64>() - 1.0)
            }
        })
    }
}

/// Oracle surface checked by [`check_clarke_properties`]; implemented by
/// [`PiecewiseC1Spec`] and by test doubles.
pub trait ClarkeOracle {
    fn dim(&self) -> usize;
    fn subgradient_box(&self, x: &Vector) -> SubgradientBox;
    fn clarke_dir(&self, x: &Vector, d: &Vector) -> f64;
    fn local_lipschitz(&self, x: &Vector) -> f64;
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vector;
}

impl ClarkeOracle for PiecewiseC1Spec {
    fn dim(&self) -> usize {
        PiecewiseC1Spec::dim(self)
    }

    fn subgradient_box(&self, x: &Vector) -> SubgradientBox {
        PiecewiseC1Spec::subgradient_box(self, x)
    }

    fn clarke_dir(&self, x: &Vector, d: &Vector) -> f64 {
        PiecewiseC1Spec::clarke_dir(self, x, d)
    }

    fn local_lipschitz(&self, x: &Vector) -> f64 {
        self.lipschitz_estimate(x, 1e-3)
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vector {
        let radius = 5.0 + 2.0 * self.breakpoint_scale();
        PiecewiseC1Spec::sample_point(self, rng, radius)
    }
}

/// Worst deviations seen while checking the directional-derivative laws.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PropertyReport {
    pub samples: usize,
    pub max_homogeneity_error: f64,
    pub max_subadditivity_excess: f64,
    pub max_formula_gap: f64,
    pub max_lipschitz_excess: f64,
}

/// Check positive homogeneity, subadditivity, the max formula and the local
/// Lipschitz bound of `J⁰` on random samples.
pub fn check_clarke_laws(j: &PiecewiseC1Spec, samples: usize, seed: u64) -> Result<PropertyReport> {
    check_clarke_properties(j, samples, seed)
}

pub fn check_clarke_properties<O: ClarkeOracle>(
    oracle: &O,
    samples: usize,
    seed: u64,
) -> Result<PropertyReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = oracle.dim();
    let mut report = PropertyReport {
        samples,
        ..Default::default()
    };
    let violation = |property: &str, witness: String| Error::PropertyViolation {
        property: property.to_string(),
        witness,
    };
    for s in 0..samples {
        let x = oracle.sample_point(&mut rng);
        let d = random_normal(&mut rng, k);
        let d2 = random_normal(&mut rng, k);
        let t = (10.0_f64).powf(rng.random_range(-3.0..3.0));
        let bx = oracle.subgradient_box(&x);
        let scale = 1.0 + bx.lo.amax().max(bx.hi.amax());
        let tol = 1e-12 * scale * (1.0 + d.norm() + d2.norm());

        let j0 = oracle.clarke_dir(&x, &d);
        // max formula: every element is dominated, a vertex attains the value
        for _ in 0..100 {
            let xi = bx.sample(&mut rng);
            let gap = xi.dot(&d) - j0;
            if gap > tol {
                return Err(violation(
                    "max-formula",
                    format!("sample {s}: x={x:?}, d={d:?}, xi={xi:?} exceeds J0={j0} by {gap:e}"),
                ));
            }
        }
        let vertex = bx.argmax_vertex(&d);
        let gap = (vertex.dot(&d) - j0).abs();
        report.max_formula_gap = report.max_formula_gap.max(gap);
        if gap > tol {
            return Err(violation(
                "max-formula",
                format!("sample {s}: x={x:?}, d={d:?}, vertex value {} vs J0={j0}", vertex.dot(&d)),
            ));
        }

        let scaled = oracle.clarke_dir(&x, &(&d * t));
        let herr = (scaled - t * j0).abs();
        report.max_homogeneity_error = report.max_homogeneity_error.max(herr / (1.0 + t));
        if herr > tol * (1.0 + t) {
            return Err(violation(
                "positive-homogeneity",
                format!("sample {s}: x={x:?}, d={d:?}, t={t}: {scaled} vs {}", t * j0),
            ));
        }

        let sum = oracle.clarke_dir(&x, &(&d + &d2));
        let excess = sum - (j0 + oracle.clarke_dir(&x, &d2));
        report.max_subadditivity_excess = report.max_subadditivity_excess.max(excess);
        if excess > tol {
            return Err(violation(
                "subadditivity",
                format!("sample {s}: x={x:?}, d={d:?}, d'={d2:?}, excess {excess:e}"),
            ));
        }

        let lip = oracle.local_lipschitz(&x);
        let lexcess = j0.abs() - lip * d.norm();
        report.max_lipschitz_excess = report.max_lipschitz_excess.max(lexcess);
        if lexcess > tol {
            return Err(violation(
                "lipschitz-bound",
                format!("sample {s}: x={x:?}, d={d:?}: |J0|={} > L={lip}·|d|", j0.abs()),
            ));
        }
    }
    Ok(report)
}

/// Fitted growth constants for `J⁰(v; −v) ≤ α_J + β_J ‖v‖^θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthFit {
    pub alpha_j: f64,
    pub beta_j: f64,
    pub samples: usize,
}

/// Smallest `(α_J, β_J)`, in the sense of minimal `α_J + β_J`, covering
/// `J⁰(v; −v)` on samples with `‖v‖ ≤ radius`.
///
/// Fails when the tail of `J` grows faster than `‖v‖^θ`, in which case no
/// finite pair exists on the whole space.
pub fn estimate_growth(
    j: &PiecewiseC1Spec,
    theta: f64,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<GrowthFit> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    if theta < 0.0 {
        return Err(Error::InvalidArgument("theta must be nonnegative".into()));
    }
    let exponent = j.tail_growth_exponent();
    if f64::from(exponent) > theta {
        return Err(Error::GrowthFit(format!(
            "J0(v;-v) grows like |v|^{exponent}, faster than |v|^{theta}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = j.dim();
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(samples + 2 * k + 1);
    let mut push = |v: &Vector| {
        let w = v.norm().powf(theta);
        let g = j.clarke_dir(v, &(-v));
        pts.push((if v.norm() == 0.0 && theta == 0.0 { 1.0 } else { w }, g));
    };
    push(&Vector::zeros(k));
    for i in 0..k {
        for sign in [-1.0, 1.0] {
            let mut e = Vector::zeros(k);
            e[i] = sign * radius;
            push(&e);
        }
    }
    for _ in 0..samples {
        let v = if rng.random::<f64>() < 0.3 {
            let mut v = j.sample_point(&mut rng, radius / (k as f64).sqrt());
            if v.norm() > radius {
                v *= radius / v.norm();
            }
            v
        } else {
            random_in_ball(&mut rng, k, radius)
        };
        push(&v);
    }
    if pts.iter().any(|(w, g)| !w.is_finite() || !g.is_finite()) {
        return Err(Error::GrowthFit("non-finite sample".into()));
    }

    let alpha_for = |beta: f64| {
        pts.iter()
            .map(|&(w, g)| g - beta * w)
            .fold(0.0_f64, f64::max)
    };
    let objective = |beta: f64| beta + alpha_for(beta);
    let beta_hi = pts
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|&(w, g)| g / w)
        .fold(MIN_BETA, f64::max);
    // golden-section search on the convex objective
    let (mut a, mut b) = (MIN_BETA, beta_hi.max(MIN_BETA));
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..200 {
        if b - a <= 1e-15 * (1.0 + b) {
            break;
        }
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if objective(c) <= objective(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let mut beta = a;
    for cand in [MIN_BETA, beta_hi] {
        if objective(cand) < objective(beta) {
            beta = cand;
        }
    }
    let mut alpha = alpha_for(beta);
    if alpha > 0.0 {
        alpha *= 1.0 + 1e-12;
    }
    Ok(GrowthFit {
        alpha_j: alpha,
        beta_j: beta,
        samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kink() -> PiecewiseC1Spec {
        // |x| - x²/4
        PiecewiseC1Spec::uniform(1, CoordinateFunction::kink(1.0, -0.5))
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_row_slice(x)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(kink().eval(&v(&[2.0])), 1.0);
        assert_eq!(kink().eval(&v(&[0.0])), 0.0);
        let two = PiecewiseC1Spec::new(vec![
            CoordinateFunction::kink(1.0, 0.0),
            CoordinateFunction::quadratic(2.0, 0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(two.eval(&v(&[-1.0, 2.0])), 5.0);
    }

    #[test]
    fn subgradient_box_examples() {
        let b = kink().subgradient_box(&v(&[0.0]));
        assert_eq!((b.lo[0], b.hi[0]), (-1.0, 1.0));
        let b = kink().subgradient_box(&v(&[-0.0]));
        assert_eq!((b.lo[0], b.hi[0]), (-1.0, 1.0));
        let b = kink().subgradient_box(&v(&[2.0]));
        assert_eq!((b.lo[0], b.hi[0]), (0.0, 0.0));
        let sq = PiecewiseC1Spec::uniform(1, CoordinateFunction::quadratic(2.0, 0.0, 0.0));
        for x in [-3.0, 0.0, 1.5] {
            let b = sq.subgradient_box(&v(&[x]));
            assert_eq!((b.lo[0], b.hi[0]), (2.0 * x, 2.0 * x));
        }
    }

    #[test]
    fn clarke_dir_examples() {
        assert_eq!(kink().clarke_dir(&v(&[0.0]), &v(&[1.0])), 1.0);
        assert_eq!(kink().clarke_dir(&v(&[0.0]), &v(&[-1.0])), 1.0);
        let sq = PiecewiseC1Spec::uniform(1, CoordinateFunction::quadratic(2.0, 0.0, 0.0));
        assert_eq!(sq.clarke_dir(&v(&[3.0]), &v(&[-2.0])), -12.0);
        // boxes [-1,1] x [2,2]
        let two = PiecewiseC1Spec::new(vec![
            CoordinateFunction::kink(1.0, 0.0),
            CoordinateFunction::new(vec![], vec![Piece::Affine { a: 2.0, b: 0.0 }]).unwrap(),
        ])
        .unwrap();
        assert_eq!(two.clarke_dir(&v(&[0.0, 7.0]), &v(&[1.0, -1.0])), -1.0);
    }

    #[test]
    fn construction_errors() {
        let bad_order = CoordinateFunction::new(
            vec![1.0, 0.0],
            vec![Piece::Affine { a: 0.0, b: 0.0 }; 3],
        );
        assert!(matches!(bad_order, Err(Error::Parse(_))));
        let bad_count = CoordinateFunction::new(vec![0.0], vec![Piece::Affine { a: 0.0, b: 0.0 }]);
        assert!(matches!(bad_count, Err(Error::Shape(_))));
        let jump = CoordinateFunction::new(
            vec![0.0],
            vec![Piece::Affine { a: 0.0, b: 0.0 }, Piece::Affine { a: 0.0, b: 1.0 }],
        );
        assert!(matches!(jump, Err(Error::Parse(_))));
        let stray_kink = CoordinateFunction::new(
            vec![],
            vec![Piece::Abs { w: 1.0, at: 0.5, q: 0.0, a: 0.0, b: 0.0 }],
        );
        assert!(matches!(stray_kink, Err(Error::Parse(_))));
    }

    #[test]
    fn multi_breakpoint_function() {
        // clamp-like friction: slope 1 on (-inf, -1), 0.2 on (-1, 1), 1 on (1, inf)
        let c = CoordinateFunction::new(
            vec![-1.0, 1.0],
            vec![
                Piece::Affine { a: 1.0, b: 0.8 },
                Piece::Affine { a: 0.2, b: 0.0 },
                Piece::Affine { a: 1.0, b: -0.8 },
            ],
        );
        // -1·1 + 0.8 = -0.2 = 0.2·(-1): continuous
        let c = c.unwrap();
        assert_eq!(c.derivative_interval(-1.0), (0.2, 1.0));
        assert_eq!(c.derivative_interval(0.0), (0.2, 0.2));
        assert!(!c.kinks_convex());
        assert_eq!(c.derivative_interval_within(1.0 + 1e-14, 1e-10), (0.2, 1.0));
    }

    #[test]
    fn prox_kink_and_pieces() {
        let c = CoordinateFunction::kink(1.0, -0.5);
        // inside the kink window [-c, c]
        assert_eq!(c.prox(0.3, 0.5), (0.0, 0.0));
        // right piece: j' = 1 - y/2, y = (z - c)/(1 - c/2)
        let (y, d) = c.prox(2.0, 0.5);
        assert!((y - 1.5 / 0.75).abs() < 1e-15);
        assert!((d - 1.0 / 0.75).abs() < 1e-15);
        // optimality: (z - y)/c is in the derivative interval at y
        for z in [-3.0, -0.5, -0.2, 0.1, 0.49, 0.51, 4.0] {
            let (y, _) = c.prox(z, 0.5);
            let (lo, hi) = c.derivative_interval(y);
            let g = (z - y) / 0.5;
            assert!(lo - 1e-12 <= g && g <= hi + 1e-12, "z={z} y={y} g={g}");
        }
    }

    #[test]
    fn growth_fit_examples() {
        let zero = PiecewiseC1Spec::zero(2);
        let fit = estimate_growth(&zero, 1.0, 3.0, 200, 1).unwrap();
        assert_eq!(fit.alpha_j, 0.0);
        assert_eq!(fit.beta_j, MIN_BETA);

        // |x|: J0(v; -v) = -|v|, covered by (0, MIN_BETA)
        let abs = PiecewiseC1Spec::uniform(1, CoordinateFunction::kink(1.0, 0.0));
        let fit = estimate_growth(&abs, 1.0, 10.0, 500, 2).unwrap();
        assert_eq!(fit.alpha_j, 0.0);
        assert_eq!(fit.beta_j, MIN_BETA);

        // |x| - x²/4: J0(v; -v) = -|v| + v²/2 needs theta = 2
        let fit = estimate_growth(&kink(), 2.0, 10.0, 2000, 3).unwrap();
        assert!(fit.alpha_j >= 0.0 && fit.beta_j > 0.0);
        assert!(fit.alpha_j + fit.beta_j <= 0.5 + 1e-9);
        for i in 0..=1000 {
            let x = -10.0 + 0.02 * i as f64;
            let g = kink().clarke_dir(&v(&[x]), &v(&[-x]));
            assert!(g <= fit.alpha_j + fit.beta_j * x * x + 1e-9, "x={x}");
        }
        assert!(matches!(
            estimate_growth(&kink(), 1.0, 10.0, 100, 3),
            Err(Error::GrowthFit(_))
        ));
    }

    #[test]
    fn prop_check_passes_on_kink_and_zero() {
        let rep = check_clarke_laws(&kink(), 10_000, 7).unwrap();
        assert_eq!(rep.samples, 10_000);
        let rep = check_clarke_laws(&PiecewiseC1Spec::zero(3), 1000, 7).unwrap();
        assert_eq!(rep.max_formula_gap, 0.0);
    }

    struct Shifted(PiecewiseC1Spec);

    impl ClarkeOracle for Shifted {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn subgradient_box(&self, x: &Vector) -> SubgradientBox {
            self.0.subgradient_box(x)
        }
        fn clarke_dir(&self, x: &Vector, d: &Vector) -> f64 {
            self.0.clarke_dir(x, d) - 0.1
        }
        fn local_lipschitz(&self, x: &Vector) -> f64 {
            ClarkeOracle::local_lipschitz(&self.0, x)
        }
        fn sample_point(&self, rng: &mut ChaCha8Rng) -> Vector {
            ClarkeOracle::sample_point(&self.0, rng)
        }
    }

    #[test]
    fn corrupted_oracle_is_caught() {
        match check_clarke_properties(&Shifted(kink()), 100, 1) {
            Err(Error::PropertyViolation { property, .. }) => assert_eq!(property, "max-formula"),
            other => panic!("expected violation, got {other:?}"),
        }
    }
}
