//! Dense brute-force checks of the smoothing bounds on random saddle systems.

use uzawa_mg::analysis::{verify_theorems, DEFAULT_SIZES};

fn main() -> uzawa_mg::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let report = verify_theorems(seed, &DEFAULT_SIZES, 8)?;
    for s in report.summary() {
        println!(
            "{:<20} {:>5} checks  {:>2} violations  min slack {:.3}",
            format!("{:?}", s.family),
            s.checks,
            s.violations,
            s.min_relative_slack
        );
    }
    println!("resamples: {}", report.resamples);
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
