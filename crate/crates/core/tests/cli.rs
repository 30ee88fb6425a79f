use std::fs;
use std::path::{Path, PathBuf};

use mvhvi::cli::{run, EXIT_ANOMALY, EXIT_HYPOTHESIS, EXIT_OK, EXIT_USAGE};

fn instances() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn run_in(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["mvhvi", "--out", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

fn read_kv(path: &Path, kind: &str) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter_map(|l| {
            let parts: Vec<&str> = l.split(',').collect();
            (parts[0] == kind).then(|| parts[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn solve_kink_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let code = run_in(
        dir.path(),
        &["solve", "--instance", "kink-multiplier", "--trace", trace.to_str().unwrap()],
    );
    assert_eq!(code, EXIT_OK);
    let sol = dir.path().join("solution.csv");
    let u = read_kv(&sol, "u");
    let l = read_kv(&sol, "lambda");
    assert!(u[0].abs() <= 1e-8, "{u:?}");
    assert!((2.0 - 1e-8..=4.0 + 1e-8).contains(&l[0]), "{l:?}");
    let head = fs::read_to_string(&trace).unwrap();
    assert!(head.starts_with("iter,r,s,u_update_norm,compl_residual\n"));
}

#[test]
fn solve_instance_files() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["scalar_lcp.json", "kink_multiplier.json", "contact_rod_5.json"] {
        let path = instances().join(name);
        assert_eq!(run_in(dir.path(), &["solve", "--instance", path.to_str().unwrap()]), EXIT_OK, "{name}");
    }
    let rod = read_kv(&dir.path().join("solution.csv"), "u");
    assert!((rod[3] + 59.0 / 7.5).abs() <= 1e-8, "{rod:?}");
}

#[test]
fn uncoupled_instance_fails_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["audit", "--instance", "kink-uncoupled"]), EXIT_HYPOTHESIS);
    let csv = fs::read_to_string(dir.path().join("audit.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("H(b) inf-sup,Violated")), "{csv}");
    assert_eq!(run_in(dir.path(), &["solve", "--instance", "kink-uncoupled"]), EXIT_HYPOTHESIS);
    assert_eq!(
        run_in(dir.path(), &["solve", "--instance", "kink-uncoupled", "--no-audit"]),
        EXIT_OK
    );
}

#[test]
fn gallery_passes_audit_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["scalar-lcp", "kink-multiplier", "contact-rod-10"] {
        assert_eq!(run_in(dir.path(), &["audit", "--instance", name]), EXIT_OK, "{name}");
        assert_eq!(run_in(dir.path(), &["solve", "--instance", name]), EXIT_OK, "{name}");
        let sol = dir.path().join("solution.csv");
        let u: Vec<String> = read_kv(&sol, "u").iter().map(|x| format!("{x:e}")).collect();
        let l: Vec<String> = read_kv(&sol, "lambda").iter().map(|x| format!("{x:e}")).collect();
        let code = run_in(
            dir.path(),
            &["verify", "--instance", name, "--u", &u.join(","), "--lambda", &l.join(",")],
        );
        assert_eq!(code, EXIT_OK, "{name}");
    }
}

#[test]
fn verify_flags_a_wrong_pair_and_writes_landscape() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(
        dir.path(),
        &["verify", "--instance", "kink-multiplier", "--u", "0.5", "--lambda", "3", "--landscape", "--probes", "500"],
    );
    assert_eq!(code, EXIT_ANOMALY);
    let csv = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let land = fs::read_to_string(dir.path().join("landscape.dat")).unwrap();
    assert_eq!(land.lines().filter(|l| !l.starts_with('#')).count(), 41);
}

#[test]
fn verify_reads_vectors_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.csv");
    let l = dir.path().join("l.csv");
    fs::write(&u, "0\n").unwrap();
    fs::write(&l, "2.5\n").unwrap();
    let code = run_in(
        dir.path(),
        &[
            "verify",
            "--instance",
            "kink-multiplier",
            "--u",
            u.to_str().unwrap(),
            "--lambda",
            l.to_str().unwrap(),
            "--formulation",
            "minty",
        ],
    );
    assert_eq!(code, EXIT_OK);
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let args = ["--seed", "7", "verify", "--instance", "contact-rod-4", "--u", "0,0,0", "--lambda", "2", "--probes", "800"];
        run_in(dir.path(), &args);
        run_in(dir.path(), &["--seed", "7", "audit", "--instance", "contact-rod-4", "--samples", "500"]);
        run_in(dir.path(), &["--seed", "7", "stability", "--instance", "kink-multiplier", "--pairs", "5"]);
    }
    for file in ["verify.csv", "audit.csv", "stability.csv"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
}

#[test]
fn oracle_brackets_the_multiplier_interval() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(dir.path(), &["oracle", "--instance", "kink-multiplier", "--delta", "0.02", "--tol", "0.1"]);
    assert_eq!(code, EXIT_OK);
    let csv = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    let lams: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let lo = lams.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lams.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(lo <= 2.0 + 1e-9 && lo >= 1.8, "{lo}");
    assert!(hi >= 4.0 - 1e-9 && hi <= 4.2, "{hi}");
}

#[test]
fn suite_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["suite", "--only", "7,8"]), EXIT_OK);
    let csv = fs::read_to_string(dir.path().join("suite.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["bogus"]), EXIT_USAGE);
    assert_eq!(run_in(dir.path(), &["solve", "--instance", "no-such-thing"]), EXIT_USAGE);
    assert_eq!(
        run_in(dir.path(), &["verify", "--instance", "kink-multiplier", "--u", "x", "--lambda", "1"]),
        EXIT_USAGE
    );
    assert_eq!(
        run_in(dir.path(), &["verify", "--instance", "kink-multiplier", "--u", "0,0", "--lambda", "1"]),
        EXIT_USAGE
    );
    assert_eq!(run_in(dir.path(), &["--help"]), EXIT_OK);
}
