//! Command-line driver for the multigrid experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uzawa_mg::bench::{self, Command, ExperimentConfig, RunReport, EXIT_CONFIG, EXIT_FAILURE};
use uzawa_mg::Error;

#[derive(Parser)]
#[command(name = "uzawa-bench", version, about = "Multigrid experiments with Uzawa-type smoothers")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Damping parameter ω of Ŝ = ω⁻¹ diag M_q by the power method
    Omega(Common),
    /// Smoothing norms ‖𝒜Mᵛ‖ against ν
    SmoothRate(Common),
    /// Asymptotic multigrid convergence rates
    RatesTable(Common),
    /// Iteration counts to a relative residual of epsilon
    SolveTable(Common),
    /// Relative costs of the smoothers
    Costs(Common),
    /// Dense checks of the smoothing bounds and identities
    VerifyTheorems(Common),
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. --set omega=auto (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Levels, e.g. 3 or 1..4 or 2,4
    #[arg(long, visible_alias = "level")]
    levels: Option<String>,
    /// Smoothing steps, e.g. 1,2,4,6,8
    #[arg(long)]
    nu: Option<String>,
    /// Smoother variants, e.g. lower,symmetric or lower:symmetric_gs:damped_gs_c
    #[arg(long, visible_alias = "class")]
    variants: Option<String>,
    /// V or W
    #[arg(long)]
    cycle: Option<String>,
    /// A number or `auto`
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Path prefix for report files; without it the CSV goes to stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv, json or both
    #[arg(long)]
    format: Option<String>,
    /// Evaluate independent cells on several threads
    #[arg(long)]
    parallel: bool,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{k}={v}"));
            }
        };
        push("levels", self.levels.clone());
        push("nu", self.nu.clone());
        push("variants", self.variants.clone());
        push("cycle", self.cycle.clone());
        push("omega", self.omega.clone());
        push("seed", self.seed.map(|s| s.to_string()));
        push("output", self.output.as_ref().map(|p| p.display().to_string()));
        push("format", self.format.clone());
        if self.parallel {
            o.push("parallel=true".into());
        }
        // Explicit --set overrides win over the convenience flags.
        o.extend(self.overrides.iter().cloned());
        o
    }
}

fn configure(command: Command, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::new(command);
    if let Some(path) = &common.config {
        config.apply_file(path)?;
    }
    config.apply_overrides(common.overrides().iter().map(String::as_str))?;
    config.validate()?;
    Ok(config)
}

fn summarize(report: &RunReport) {
    if let Some(w) = report.omega {
        eprintln!("omega = {w}");
    }
    for run in &report.omega_runs {
        let e = &run.estimate;
        println!(
            "level {}: omega = {:.5} (lambda_max = {:.6}, {} iterations, converged = {})",
            run.level, e.omega, e.lambda_max, e.iterations, e.converged
        );
        let history: Vec<String> = e.history.iter().map(|l| format!("{l:.6}")).collect();
        println!("  history: {}", history.join(" "));
    }
    if let Some(t) = &report.theorems {
        for s in &report.theorem_summary {
            eprintln!(
                "{:?}: {} checks, {} violations, min relative slack {:.3e}",
                s.family, s.checks, s.violations, s.min_relative_slack
            );
        }
        for v in t.violations() {
            eprintln!(
                "VIOLATION seed {} {:?} system {} ({}+{}) nu {:?}: lhs {:e} > rhs {:e} (margin {:e}) [{}]",
                t.seed,
                v.family,
                v.system,
                v.n,
                v.m,
                v.nu,
                v.lhs,
                v.rhs,
                v.rhs - v.lhs,
                v.note
            );
        }
    }
    let diverged: Vec<String> = report
        .rows
        .iter()
        .filter(|r| r.diverged == Some(true))
        .map(|r| format!("{} level {} nu {}", r.variant, r.level, r.nu))
        .collect();
    if !diverged.is_empty() {
        eprintln!("diverged: {}", diverged.join("; "));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Sub::Omega(c) => (Command::Omega, c),
        Sub::SmoothRate(c) => (Command::SmoothRate, c),
        Sub::RatesTable(c) => (Command::RatesTable, c),
        Sub::SolveTable(c) => (Command::SolveTable, c),
        Sub::Costs(c) => (Command::Costs, c),
        Sub::VerifyTheorems(c) => (Command::VerifyTheorems, c),
    };
    let config = match configure(command, common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("uzawa-bench: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let report = match bench::run(&config) {
        Ok(r) => r,
        Err(e @ Error::Config { .. }) => {
            eprintln!("uzawa-bench: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            eprintln!("uzawa-bench: {e}");
            return ExitCode::from(EXIT_FAILURE as u8);
        }
    };
    summarize(&report);
    match &config.output {
        Some(prefix) => match report.write(prefix) {
            Ok(paths) => {
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            }
            Err(e) => {
                eprintln!("uzawa-bench: {e}");
                return ExitCode::from(EXIT_FAILURE as u8);
            }
        },
        None if config.format.json() && !config.format.csv() => match report.to_json() {
            Ok(j) => println!("{j}"),
            Err(e) => {
                eprintln!("uzawa-bench: {e}");
                return ExitCode::from(EXIT_FAILURE as u8);
            }
        },
        None => print!("{}", report.to_csv()),
    }
    ExitCode::from(report.exit_code() as u8)
}
