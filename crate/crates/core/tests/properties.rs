use mvhvi::gallery::{kink_multiplier, kink_uncoupled};
use mvhvi::hypotheses::infsup_constant;
use mvhvi::linalg::{Matrix, Vector};
use mvhvi::nonsmooth::{CoordinateFunction, PiecewiseC1Spec};
use mvhvi::problem::{BilinearFormSpec, LambdaSet, ProblemInstance};
use mvhvi::random::{equality_instance, random_instance, LambdaKind, RandomSpec};
use mvhvi::solver::{solve, SolverConfig};
use mvhvi::verify::{ProbeConfig, CERT_TOL};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec_of(n: usize, range: f64) -> impl Strategy<Value = Vector> {
    proptest::collection::vec(-range..range, n).prop_map(Vector::from_vec)
}

fn lambda_set(m: usize) -> impl Strategy<Value = LambdaSet> {
    prop_oneof![
        Just(LambdaSet::NonnegativeOrthant),
        proptest::collection::vec(0.0..3.0, m).prop_map(|g| LambdaSet::boxed(Vector::from_vec(g)).unwrap()),
        (proptest::collection::vec(-2.0..2.0, (m + 1) * m), proptest::collection::vec(0.0..2.0, m + 1)).prop_map(
            move |(c, d)| LambdaSet::polyhedron(Matrix::from_row_slice(m + 1, m, &c), Vector::from_vec(d)).unwrap()
        ),
    ]
}

fn set_and_points() -> impl Strategy<Value = (LambdaSet, Vector, Vector)> {
    (1usize..5).prop_flat_map(|m| (lambda_set(m), vec_of(m, 10.0), vec_of(m, 10.0)))
}

fn coord() -> impl Strategy<Value = CoordinateFunction> {
    prop_oneof![
        (0.1..2.0, -1.0..1.0).prop_map(|(w, q)| CoordinateFunction::kink(w, q)),
        (-1.0..1.0, -2.0..2.0, -1.0..1.0).prop_map(|(q, a, b)| CoordinateFunction::quadratic(q, a, b)),
        Just(CoordinateFunction::zero()),
    ]
}

fn separable() -> impl Strategy<Value = PiecewiseC1Spec> {
    proptest::collection::vec(coord(), 1..5).prop_map(|c| PiecewiseC1Spec::new(c).unwrap())
}

fn j_and_points() -> impl Strategy<Value = (PiecewiseC1Spec, Vector, Vector, Vector)> {
    separable().prop_flat_map(|j| {
        let k = j.dim();
        // half the points sit exactly on a kink
        let x = prop_oneof![vec_of(k, 5.0), Just(Vector::zeros(k))];
        (Just(j), x, vec_of(k, 5.0), vec_of(k, 5.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_feasible_idempotent_nonexpansive((set, x, y) in set_and_points()) {
        let px = set.project(&x).unwrap();
        let py = set.project(&y).unwrap();
        prop_assert!(set.contains(&px, 1e-9));
        let ppx = set.project(&px).unwrap();
        prop_assert!((&ppx - &px).norm() <= 1e-9 * (1.0 + px.norm()));
        prop_assert!((&px - &py).norm() <= (&x - &y).norm() * (1.0 + 1e-9) + 1e-9);
        // obtuse-angle characterisation against another feasible point
        prop_assert!((&x - &px).dot(&(&py - &px)) <= 1e-7 * (1.0 + x.norm() * py.norm()));
    }

    #[test]
    fn clarke_derivative_laws((j, x, d, e) in j_and_points(), t in 0.0..10.0f64) {
        let jd = j.clarke_dir(&x, &d);
        let scale = 1.0 + jd.abs();
        prop_assert!((j.clarke_dir(&x, &(&d * t)) - t * jd).abs() <= 1e-12 * scale * (1.0 + t));
        let sum = j.clarke_dir(&x, &(&d + &e));
        prop_assert!(sum <= jd + j.clarke_dir(&x, &e) + 1e-12 * (scale + sum.abs()));
        prop_assert!(jd + j.clarke_dir(&x, &(-&d)) >= -1e-12 * scale);
        let lip = j.lipschitz_estimate(&x, 1e-6);
        prop_assert!(jd.abs() <= lip * d.norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn support_is_attained_at_a_vertex((j, x, d, _e) in j_and_points()) {
        let bx = j.subgradient_box(&x);
        let by_vertex = bx.vertices().iter().map(|v| v.dot(&d)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((bx.support(&d) - by_vertex).abs() <= 1e-12 * (1.0 + by_vertex.abs()));
        prop_assert!(bx.contains(&bx.argmax_vertex(&d)));
    }

    #[test]
    fn prox_output_satisfies_the_inclusion(c in coord(), z in -10.0..10.0f64, step in 0.05..0.9f64) {
        // 1 + c·q > 0 holds since |q| ≤ 1 and c < 1
        let (p, _) = c.prox(z, step);
        let (lo, hi) = c.derivative_interval_within(p, 1e-12);
        let g = (z - p) / step;
        prop_assert!(g >= lo - 1e-9 * (1.0 + g.abs()) && g <= hi + 1e-9 * (1.0 + g.abs()), "{g} not in [{lo}, {hi}]");
    }

    #[test]
    fn pairing_is_bilinear(
        (b, v, w, r1, r2) in (1usize..5, 1usize..5).prop_flat_map(|(m, n)| (
            proptest::collection::vec(-3.0..3.0, m * n).prop_map(move |x| Matrix::from_row_slice(m, n, &x)),
            vec_of(n, 5.0), vec_of(n, 5.0), vec_of(m, 5.0), vec_of(m, 5.0))),
        a in -3.0..3.0f64,
    ) {
        let spec = BilinearFormSpec { b };
        let lin_v = spec.eval(&(&v * a + &w), &r1) - a * spec.eval(&v, &r1) - spec.eval(&w, &r1);
        let lin_r = spec.eval(&v, &(&r1 * a + &r2)) - a * spec.eval(&v, &r1) - spec.eval(&v, &r2);
        prop_assert!(lin_v.abs() <= 1e-10 && lin_r.abs() <= 1e-10);
    }

    #[test]
    fn infsup_scales_with_the_form(
        b in (1usize..5, 1usize..6).prop_flat_map(|(m, n)|
            proptest::collection::vec(-3.0..3.0, m * n).prop_map(move |x| Matrix::from_row_slice(m, n, &x))),
        c in -50.0..50.0f64,
    ) {
        let base = infsup_constant(&BilinearFormSpec { b: b.clone() });
        let scaled = infsup_constant(&BilinearFormSpec { b: &b * c });
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-10 * (1.0 + c.abs() * base));
        prop_assert!(base >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn equality_instance_attains_the_stability_bound(f1 in vec_of(3, 5.0), f2 in vec_of(3, 5.0)) {
        let inst = equality_instance(3, 2.0).unwrap();
        let cfg = SolverConfig::default();
        let (s1, _) = solve(&inst.with_f(f1.clone()), &cfg).unwrap();
        let (s2, _) = solve(&inst.with_f(f2.clone()), &cfg).unwrap();
        let expect = (&f1 - &f2).norm() / 2.0;
        prop_assert!(((&s1.u - &s2.u).norm() - expect).abs() <= 1e-8 * (1.0 + expect));
    }

    #[test]
    fn kink_solutions_are_certified(f in -6.0..6.0f64) {
        for inst in [kink_multiplier(f), kink_uncoupled(f)] {
            let (sol, _) = solve(&inst, &SolverConfig::default()).unwrap();
            prop_assert!(sol.residuals.certified(CERT_TOL), "f = {f}: {:?}", sol.residuals);
        }
    }

    #[test]
    fn instance_json_round_trips(seed in 0u64..10_000, kind in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = RandomSpec::draw(&mut rng, LambdaKind::ALL[kind]);
        let mut inst = random_instance(seed, &spec).unwrap();
        let back = ProblemInstance::from_json(&inst.to_json()).unwrap();
        // constants read from a file count as declared
        inst.profile.provenance = back.profile.provenance;
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn residuals_are_reproducible(seed in 0u64..1000) {
        let inst = kink_multiplier(3.0);
        let probes = ProbeConfig { samples: 300, seed, refine: true };
        let u = Vector::from_element(1, 0.1);
        let l = Vector::from_element(1, 2.5);
        let a = mvhvi::verify::all_residuals(&inst, &u, &l, &probes).unwrap();
        let b = mvhvi::verify::all_residuals(&inst, &u, &l, &probes).unwrap();
        prop_assert_eq!(a, b);
    }
}
