//! Runs the nine acceptance criteria in sequence, one line each, so that
//! their timings are not skewed by parallel test threads.

use mvhvi::suite::{run_criterion, CRITERIA};

fn main() {
    let seed = std::env::var("MVHVI_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut failed = 0;
    for id in 1..=CRITERIA.len() {
        let out = run_criterion(id, seed);
        println!("{out}");
        if !out.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
