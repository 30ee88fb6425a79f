//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gallery::gallery_instance;
use crate::hypotheses::{audit_instance, AuditConfig};
use crate::linalg::{random_normal, Vector};
use crate::problem::{HFunctionSpec, ProblemInstance};
use crate::solver::{multi_start, solve, SolverConfig, Termination};
use crate::suite;
use crate::verify::{brute_force_oracle, oracle_tolerance, residual, stability_check, Formulation, ProbeConfig, CERT_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ANOMALY: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "mvhvi", version, about = "Solve and verify mixed variational-hemivariational inequalities")]
struct Cli {
    /// Directory for report files.
    #[arg(long, global = true, default_value = "mvhvi-out")]
    out: PathBuf,
    /// Seed for every stochastic probe.
    #[arg(long, global = true, env = "MVHVI_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an instance and certify the result.
    Solve(SolveArgs),
    /// Evaluate formulation residuals at a given pair.
    Verify(VerifyArgs),
    /// Audit the structural hypotheses of an instance.
    Audit(AuditArgs),
    /// Brute-force grid search for small instances.
    Oracle(OracleArgs),
    /// Check the Hölder stability bound on random load pairs.
    Stability(StabilityArgs),
    /// Run the acceptance battery.
    Suite(SuiteArgs),
}

#[derive(Debug, Args)]
struct InstanceArg {
    /// Instance JSON file or gallery name (scalar-lcp, kink-multiplier,
    /// kink-uncoupled, contact-rod-N).
    #[arg(long)]
    instance: String,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Solve from this many random starts and report the spread.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Write the outer-iteration trace to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Skip the hypothesis audit that runs before solving.
    #[arg(long)]
    no_audit: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    instance: InstanceArg,
    /// State as comma-separated values or a CSV file.
    #[arg(long, allow_hyphen_values = true)]
    u: String,
    /// Multiplier as comma-separated values or a CSV file.
    #[arg(long, allow_hyphen_values = true)]
    lambda: String,
    /// all, original, minty, combined or minty-combined.
    #[arg(long, default_value = "all")]
    formulation: String,
    #[arg(long, default_value_t = 10_000)]
    probes: usize,
    #[arg(long, default_value_t = CERT_TOL)]
    tol: f64,
    /// Also write a violation landscape around `u` (1-D and 2-D only).
    #[arg(long)]
    landscape: bool,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[arg(long, default_value_t = 5.0)]
    r: f64,
    #[arg(long, default_value_t = 5.0)]
    s: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Acceptance threshold; derived from the grid step when omitted.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    /// Run only these criteria (1 to 9).
    #[arg(long, value_delimiter = ',')]
    only: Vec<usize>,
}

/// Map an error to its exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Hypothesis(_)
        | Error::HypothesisGate(_)
        | Error::ConstantGap { .. }
        | Error::PropertyViolation { .. }
        | Error::GrowthFit(_) => EXIT_HYPOTHESIS,
        Error::InnerDivergence { .. } | Error::ScheduleExhausted { .. } | Error::InfeasiblePolyhedron => EXIT_SOLVER,
        Error::Parse(_)
        | Error::Shape(_)
        | Error::DimensionLimit(_)
        | Error::BudgetExceeded { .. }
        | Error::InvalidArgument(_)
        | Error::Io(_) => EXIT_USAGE,
    }
}

/// Parse `argv` (including the program name), run the subcommand and return
/// the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let ctx = Context {
        out: cli.out,
        seed: cli.seed,
        format: cli.format,
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&ctx, &a),
        Command::Verify(a) => cmd_verify(&ctx, &a),
        Command::Audit(a) => cmd_audit(&ctx, &a),
        Command::Oracle(a) => cmd_oracle(&ctx, &a),
        Command::Stability(a) => cmd_stability(&ctx, &a),
        Command::Suite(a) => cmd_suite(&ctx, &a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Context {
    out: PathBuf,
    seed: u64,
    format: Format,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, contents)?;
        Ok(path)
    }

    /// In CSV mode the report goes to stdout; otherwise the summary does.
    fn emit(&self, summary: &str, csv: &str) {
        match self.format {
            Format::Human => println!("{summary}"),
            Format::Csv => print!("{csv}"),
        }
    }
}

/// Resolve a gallery name or load a JSON file.
pub fn resolve_instance(spec: &str) -> Result<ProblemInstance> {
    if let Some(inst) = gallery_instance(spec) {
        return inst;
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::InvalidArgument(format!("no gallery instance or file named {spec}")));
    }
    ProblemInstance::load(path)
}

/// Read a vector from a file (values split by commas or whitespace) or, if
/// no such file exists, from the literal text.
pub fn parse_vector(spec: &str) -> Result<Vector> {
    let path = Path::new(spec);
    let text = if path.is_file() { fs::read_to_string(path)? } else { spec.to_string() };
    let vals: std::result::Result<Vec<f64>, _> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::parse::<f64>)
        .collect();
    vals.map(Vector::from_vec)
        .map_err(|e| Error::Parse(format!("bad vector '{spec}': {e}")))
}

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.9}")).collect();
    format!("[{}]", parts.join(", "))
}

fn vector_csv(out: &mut String, name: &str, v: &Vector) {
    for (i, x) in v.iter().enumerate() {
        let _ = writeln!(out, "{name},{i},{x:.17e}");
    }
}

fn cmd_solve(ctx: &Context, a: &SolveArgs) -> Result<i32> {
    let inst = resolve_instance(&a.instance.instance)?;
    if !a.no_audit {
        let audit = audit_instance(
            &inst,
            &AuditConfig {
                samples: 2000,
                seed: ctx.seed,
                ..AuditConfig::default()
            },
        );
        if audit.fatal_violation() {
            for r in audit.reports.iter().filter(|r| !r.passed()) {
                eprintln!("{}", r.csv_line());
            }
            eprintln!("hypothesis audit failed; rerun with --no-audit to solve anyway");
            return Ok(EXIT_HYPOTHESIS);
        }
    }
    let mut cfg = SolverConfig {
        restarts: a.restarts,
        probes: ProbeConfig {
            seed: ctx.seed,
            ..ProbeConfig::default()
        },
        ..SolverConfig::default()
    };
    if let Some(t) = a.tol {
        cfg.tol_outer = t;
        cfg.tol_u = t;
    }
    if let Some(m) = a.max_outer {
        cfg.max_outer = m;
    }
    let (sol, termination, spread) = if a.restarts > 1 {
        let rep = multi_start(&inst, &cfg, ctx.seed)?;
        let sol = rep
            .solutions
            .first()
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("no restart produced a solution".into()))?;
        (sol, Termination::Converged, Some((rep.u_spread, rep.lambda_spread)))
    } else {
        let (sol, trace) = solve(&inst, &cfg)?;
        if let Some(path) = &a.trace {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let mut file = fs::File::create(path)?;
            trace.write_csv(&mut file)?;
        }
        (sol, trace.termination, None)
    };
    let res = &sol.residuals;
    let mut csv = String::from("kind,index,value\n");
    vector_csv(&mut csv, "u", &sol.u);
    vector_csv(&mut csv, "lambda", &sol.lambda);
    for (name, v) in [
        ("r_original", res.r_original),
        ("r_minty", res.r_minty),
        ("r_combined", res.r_combined),
        ("r_minty_combined", res.r_minty_combined),
    ] {
        let _ = writeln!(csv, "{name},0,{v:.17e}");
    }
    if let Some((us, ls)) = spread {
        let _ = writeln!(csv, "u_spread,0,{us:.17e}");
        let _ = writeln!(csv, "lambda_spread,0,{ls:.17e}");
    }
    ctx.write("solution.csv", &csv)?;
    let certified = res.certified(CERT_TOL);
    let mut summary = format!(
        "{}: u = {}, lambda = {}, max residual {:.3e}",
        match (termination, certified) {
            (Termination::Converged, true) => "certified",
            (Termination::Converged, false) => "converged but not certified",
            _ => "not converged",
        },
        fmt_vec(&sol.u),
        fmt_vec(&sol.lambda),
        res.max()
    );
    if let Some((us, ls)) = spread {
        let _ = write!(summary, ", u spread {us:.3e}, lambda spread {ls:.3e}");
    }
    ctx.emit(&summary, &csv);
    Ok(match (termination, certified) {
        (Termination::Converged, true) => EXIT_OK,
        (Termination::Converged, false) => EXIT_ANOMALY,
        _ => EXIT_SOLVER,
    })
}

/// Original-form violation on a grid around `u` with `λ` fixed, written as
/// whitespace-separated columns with blank lines between scanlines.
fn landscape(inst: &ProblemInstance, u: &Vector, lambda: &Vector, probes: &ProbeConfig) -> Result<String> {
    const STEPS: i32 = 20;
    let span = 1.0 + u.amax();
    let h = span / STEPS as f64;
    let mut out = String::new();
    let point = |out: &mut String, p: Vector| -> Result<()> {
        let r = residual(inst, &p, lambda, Formulation::Original, probes)?;
        let coords: Vec<String> = p.iter().map(|x| format!("{x:.6e}")).collect();
        let _ = writeln!(out, "{} {:.6e}", coords.join(" "), r.violation);
        Ok(())
    };
    match u.len() {
        1 => {
            let _ = writeln!(out, "# u violation");
            for i in -STEPS..=STEPS {
                point(&mut out, Vector::from_element(1, u[0] + i as f64 * h))?;
            }
        }
        2 => {
            let _ = writeln!(out, "# u1 u2 violation");
            for i in -STEPS..=STEPS {
                for j in -STEPS..=STEPS {
                    point(&mut out, Vector::from_vec(vec![u[0] + i as f64 * h, u[1] + j as f64 * h]))?;
                }
                out.push('\n');
            }
        }
        n => return Err(Error::DimensionLimit(format!("landscape needs n <= 2, got {n}"))),
    }
    Ok(out)
}

fn cmd_verify(ctx: &Context, a: &VerifyArgs) -> Result<i32> {
    let inst = resolve_instance(&a.instance.instance)?;
    let u = parse_vector(&a.u)?;
    let lambda = parse_vector(&a.lambda)?;
    let forms: Vec<Formulation> = if a.formulation == "all" {
        Formulation::ALL.to_vec()
    } else {
        vec![Formulation::parse(&a.formulation)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown formulation {}", a.formulation)))?]
    };
    let probes = ProbeConfig {
        samples: a.probes,
        seed: ctx.seed,
        refine: true,
    };
    let mut csv = String::from("formulation,violation,certified\n");
    let mut worst = 0.0_f64;
    for f in forms {
        let r = residual(&inst, &u, &lambda, f, &probes)?;
        worst = worst.max(r.violation);
        let _ = writeln!(csv, "{f},{:.17e},{}", r.violation, r.violation <= a.tol);
    }
    ctx.write("verify.csv", &csv)?;
    if a.landscape {
        let cheap = ProbeConfig {
            samples: a.probes.min(500),
            ..probes
        };
        ctx.write("landscape.dat", &landscape(&inst, &u, &lambda, &cheap)?)?;
    }
    let ok = worst <= a.tol;
    ctx.emit(
        &format!(
            "{}: worst residual {worst:.3e} (tol {:.1e}, {} probes)",
            if ok { "verified" } else { "not verified" },
            a.tol,
            a.probes
        ),
        &csv,
    );
    Ok(if ok { EXIT_OK } else { EXIT_ANOMALY })
}

fn cmd_audit(ctx: &Context, a: &AuditArgs) -> Result<i32> {
    let inst = resolve_instance(&a.instance.instance)?;
    let audit = audit_instance(
        &inst,
        &AuditConfig {
            samples: a.samples,
            seed: ctx.seed,
            ..AuditConfig::default()
        },
    );
    let mut csv = String::from("name,status,margin,witness_seed,witness_sample,detail\n");
    for r in &audit.reports {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    ctx.write("audit.csv", &csv)?;
    if ctx.format == Format::Human {
        for r in &audit.reports {
            let seed = r.witness.as_ref().map_or("-".to_string(), |w| w.seed.to_string());
            println!("{:<32} {:<9} margin {:>12.4e}  witness seed {seed}", r.hypothesis, r.status.to_string(), r.margin);
        }
        for w in &audit.warnings {
            println!("warning: {w}");
        }
    } else {
        print!("{csv}");
    }
    let violated = audit.reports.iter().any(|r| !r.passed());
    Ok(if violated { EXIT_HYPOTHESIS } else { EXIT_OK })
}

fn cmd_oracle(ctx: &Context, a: &OracleArgs) -> Result<i32> {
    let inst = resolve_instance(&a.instance.instance)?;
    let tol = a.tol.unwrap_or_else(|| oracle_tolerance(&inst, a.r, a.s, a.delta));
    let res = brute_force_oracle(&inst, a.r, a.s, a.delta, tol)?;
    let mut csv = String::new();
    let head: Vec<String> = (0..inst.dims.n)
        .map(|i| format!("u{i}"))
        .chain((0..inst.dims.m).map(|i| format!("lambda{i}")))
        .collect();
    let _ = writeln!(csv, "{},violation", head.join(","));
    for (u, l, v) in &res.points {
        let vals: Vec<String> = u.iter().chain(l.iter()).map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(csv, "{},{v:.6e}", vals.join(","));
    }
    ctx.write("oracle.csv", &csv)?;
    let mut summary = format!(
        "{} of {} grid points within tol {tol:.3e}",
        res.points.len(),
        res.grid_points
    );
    for i in 0..inst.dims.n {
        if let Some((lo, hi)) = res.u_range(i) {
            let _ = write!(summary, ", u{i} in [{lo:.4}, {hi:.4}]");
        }
    }
    for i in 0..inst.dims.m {
        if let Some((lo, hi)) = res.lambda_range(i) {
            let _ = write!(summary, ", lambda{i} in [{lo:.4}, {hi:.4}]");
        }
    }
    if res.boundary_touching {
        summary.push_str("; cluster touches the search boundary");
    }
    ctx.emit(&summary, &csv);
    Ok(if res.points.is_empty() || res.boundary_touching {
        EXIT_ANOMALY
    } else {
        EXIT_OK
    })
}

fn cmd_stability(ctx: &Context, a: &StabilityArgs) -> Result<i32> {
    let inst = resolve_instance(&a.instance.instance)?;
    if !matches!(inst.h, HFunctionSpec::PowerNorm { .. }) {
        return Err(Error::HypothesisGate("stability bound needs a power-form h".into()));
    }
    let cfg = SolverConfig {
        probes: ProbeConfig {
            samples: 500,
            seed: ctx.seed,
            refine: true,
        },
        ..SolverConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut csv = String::from("pair,lhs,rhs,passed\n");
    let (mut failed, mut worst) = (0, 0.0_f64);
    for p in 0..a.pairs {
        let f1 = &inst.f + random_normal(&mut rng, inst.dims.n);
        let f2 = &inst.f + random_normal(&mut rng, inst.dims.n);
        let r = stability_check(&inst, &f1, &f2, &cfg)?;
        if !r.passed {
            failed += 1;
        }
        if r.rhs > 0.0 {
            worst = worst.max(r.lhs / r.rhs);
        }
        let _ = writeln!(csv, "{p},{:.17e},{:.17e},{}", r.lhs, r.rhs, r.passed);
    }
    ctx.write("stability.csv", &csv)?;
    ctx.emit(
        &format!("{} of {} pairs within the bound, worst lhs/rhs {worst:.6}", a.pairs - failed, a.pairs),
        &csv,
    );
    Ok(if failed == 0 { EXIT_OK } else { EXIT_ANOMALY })
}

fn cmd_suite(ctx: &Context, a: &SuiteArgs) -> Result<i32> {
    let ids: Vec<usize> = if a.only.is_empty() {
        (1..=suite::CRITERIA.len()).collect()
    } else {
        a.only.clone()
    };
    let mut csv = String::from("id,name,passed,detail\n");
    let mut all = true;
    for id in ids {
        let out = suite::run_criterion(id, ctx.seed);
        all &= out.passed;
        let _ = writeln!(csv, "{},{},{},{}", out.id, out.name, out.passed, out.detail.replace(',', ";"));
        if ctx.format == Format::Human {
            println!("{out}");
        }
    }
    ctx.write("suite.csv", &csv)?;
    if ctx.format == Format::Csv {
        print!("{csv}");
    }
    Ok(if all { EXIT_OK } else { EXIT_ANOMALY })
}
