//! Experiment driver behind the `uzawa-bench` binary.

mod config;
mod report;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

pub use config::{
    parse_usize_list, Command, ExperimentConfig, OmegaChoice, OutputFormat, Variant, ETA_DISPLAY_SCALE,
    REFERENCE_NORM_SCALE, REFERENCE_OMEGA,
};
pub use report::{
    csv_field, emit_figure_data, fmt_sig6, FigureData, OmegaRun, Provenance, Row, RunReport, Trace, EXIT_CONFIG, EXIT_DIVERGED,
    EXIT_FAILURE, EXIT_OK, EXIT_THEOREM,
};

use crate::analysis::{eta, relative_costs, smoothing_norm, smoothing_rate_report, verify_theorems, CostTable, RateSample};
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::multigrid::{asymptotic_rate, CycleSpec, MultigridSolver};
use crate::smoother::{compute_omega, SmootherClass, SmootherSpec};

/// Runs the configured experiment. Divergence is reported in the rows,
/// not as an error.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let mut report = RunReport::new(config.clone());
    if config.command == Command::VerifyTheorems {
        let t = verify_theorems(config.seed, &config.theorem_sizes, config.theorem_systems)?;
        report.theorem_summary = t.summary();
        report.theorems = Some(t);
        return Ok(report);
    }
    if config.command == Command::Costs && config.variants.iter().any(|v| v.class == SmootherClass::BraessSarazin) {
        return Err(Error::Config {
            key: "variants".into(),
            message: "the cost model does not cover Braess-Sarazin".into(),
        });
    }
    let h = Hierarchy::build(config.max_level())?;
    match config.command {
        Command::Omega => run_omega(config, &h, &mut report)?,
        Command::SmoothRate => run_smooth_rate(config, &h, &mut report)?,
        Command::RatesTable => run_rates(config, &h, &mut report)?,
        Command::SolveTable => run_solves(config, &h, &mut report)?,
        Command::Costs => run_costs(config, &h, &mut report)?,
        Command::VerifyTheorems => unreachable!(),
    }
    report.sort_rows();
    Ok(report)
}

fn resolve_omega(config: &ExperimentConfig, h: &Hierarchy) -> Result<f64> {
    match config.omega {
        OmegaChoice::Fixed(w) => Ok(w),
        OmegaChoice::Auto => Ok(compute_omega(h, 0, config.omega_tol, config.seed)?.omega),
    }
}

/// Evaluates `f` on every cell, on worker threads when `parallel` is set.
/// Results keep the cell order either way.
fn run_cells<C: Sync, T: Send>(cells: &[C], parallel: bool, f: impl Fn(&C) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len());
    if !parallel || workers <= 1 {
        return cells.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let r = f(&cells[i]);
                out.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    out.into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every cell evaluated"))
        .collect()
}

fn cycle_for(config: &ExperimentConfig, nu: usize) -> Result<CycleSpec> {
    let mut c = CycleSpec::new(config.gamma, nu)?
        .with_seed(config.seed)
        .with_max_iterations(config.max_iterations)
        .with_post_smoother(config.post_smoother);
    c.epsilon = config.epsilon;
    Ok(c)
}

fn run_omega(config: &ExperimentConfig, h: &Hierarchy, report: &mut RunReport) -> Result<()> {
    let spec = SmootherSpec::lower(REFERENCE_OMEGA);
    for &level in &config.levels {
        let t = Instant::now();
        let est = compute_omega(h, level, config.omega_tol, config.seed)?;
        let mut row = Row::new(SmootherSpec { omega: est.omega, ..spec }, level, h.level(level).system.n_dofs(), 0);
        row.variant = "omega".into();
        row.lambda_max = Some(est.lambda_max);
        row.iterations = Some(est.iterations);
        row.converged = Some(est.converged);
        row.wall_seconds = t.elapsed().as_secs_f64();
        report.rows.push(row);
        report.omega_runs.push(crate::bench::OmegaRun { level, estimate: est });
    }
    Ok(())
}

/// ‖𝒜‖_{L×L} of a level, the ν = 0 smoothing norm.
fn operator_norm(config: &ExperimentConfig, h: &Hierarchy, level: usize) -> Result<f64> {
    Ok(smoothing_norm(h, level, SmootherSpec::lower(REFERENCE_OMEGA), 0, config.smoothing_tol)?.value)
}

/// Rescaling factor norm_scale/‖𝒜‖_{L×L} per requested level.
fn norm_factors(config: &ExperimentConfig, h: &Hierarchy) -> Result<Vec<(usize, f64)>> {
    let Some(target) = config.norm_scale else {
        return Ok(config.levels.iter().map(|&l| (l, 1.0)).collect());
    };
    config
        .levels
        .iter()
        .map(|&l| Ok((l, target / operator_norm(config, h, l)?)))
        .collect()
}

fn factor_of(factors: &[(usize, f64)], level: usize) -> f64 {
    factors.iter().find(|(l, _)| *l == level).map_or(1.0, |f| f.1)
}

fn run_smooth_rate(config: &ExperimentConfig, h: &Hierarchy, report: &mut RunReport) -> Result<()> {
    let omega = resolve_omega(config, h)?;
    report.omega = Some(omega);
    let factors = norm_factors(config, h)?;
    let cells: Vec<(SmootherSpec, usize)> = config
        .variants
        .iter()
        .flat_map(|v| config.levels.iter().map(move |&l| (config.spec(v, omega), l)))
        .collect();
    let results = run_cells(&cells, config.parallel, |&(spec, level)| {
        let t = Instant::now();
        let r = smoothing_rate_report(h, level, spec, &config.nu, config.smoothing_tol)?;
        Ok((r, t.elapsed().as_secs_f64()))
    })?;
    for ((spec, level), (r, secs)) in cells.into_iter().zip(results) {
        let dofs = h.level(level).system.n_dofs();
        let scale = config.norm_scale.map(|_| factor_of(&factors, level));
        for (i, &nu) in r.nu_list.iter().enumerate() {
            let mut row = Row::new(spec, level, dofs, nu);
            row.norm = Some(r.norms[i]);
            row.norm_scaled = scale.map(|s| s * r.norms[i]);
            row.eta = Some(r.eta_bound[i]);
            row.converged = Some(r.converged[i]);
            row.wall_seconds = secs / r.nu_list.len() as f64;
            report.rows.push(row);
        }
    }
    Ok(())
}

fn run_rates(config: &ExperimentConfig, h: &Hierarchy, report: &mut RunReport) -> Result<()> {
    let omega = resolve_omega(config, h)?;
    report.omega = Some(omega);
    let cells = mg_cells(config, omega);
    let results = run_cells(&cells, config.parallel, |&(spec, level, nu)| {
        let t = Instant::now();
        let cycle = cycle_for(config, nu)?;
        let est = asymptotic_rate(h, &cycle, spec, level)?;
        Ok((cycle.name(), est, t.elapsed().as_secs_f64()))
    })?;
    for ((spec, level, nu), (name, est, secs)) in cells.into_iter().zip(results) {
        let mut row = Row::new(spec, level, h.level(level).system.n_dofs(), nu);
        row.cycle = Some(name);
        row.rate = Some(est.rate);
        row.iterations = Some(est.cycles);
        row.diverged = Some(est.diverged);
        row.converged = Some(!est.diverged && !est.underflow);
        row.wall_seconds = secs;
        report.rows.push(row);
    }
    Ok(())
}

fn mg_cells(config: &ExperimentConfig, omega: f64) -> Vec<(SmootherSpec, usize, usize)> {
    let mut cells = Vec::new();
    for v in &config.variants {
        for &level in &config.levels {
            for &nu in &config.nu {
                cells.push((config.spec(v, omega), level, nu));
            }
        }
    }
    cells
}

fn run_solves(config: &ExperimentConfig, h: &Hierarchy, report: &mut RunReport) -> Result<()> {
    let omega = resolve_omega(config, h)?;
    report.omega = Some(omega);
    let cells = mg_cells(config, omega);
    let results = run_cells(&cells, config.parallel, |&(spec, level, nu)| {
        let t = Instant::now();
        let cycle = cycle_for(config, nu)?;
        let name = cycle.name();
        let r = MultigridSolver::new(h, cycle, spec, level)?.solve(None)?;
        Ok((name, r, t.elapsed().as_secs_f64()))
    })?;
    for ((spec, level, nu), (name, r, secs)) in cells.into_iter().zip(results) {
        let mut row = Row::new(spec, level, h.level(level).system.n_dofs(), nu);
        row.cycle = Some(name.clone());
        row.iterations = Some(r.iterations);
        row.converged = Some(r.converged);
        row.diverged = Some(r.diverged);
        row.rate = Some(r.final_rate);
        row.wall_seconds = secs;
        report.rows.push(row);
        let r0 = r.residual_trace.first().map_or(1.0, |e| e.residual);
        report.traces.push(Trace {
            variant: spec.label(),
            level,
            nu,
            cycle: name,
            relative_residuals: r.residual_trace.iter().map(|e| e.residual / r0).collect(),
        });
    }
    Ok(())
}

fn run_costs(config: &ExperimentConfig, h: &Hierarchy, report: &mut RunReport) -> Result<()> {
    let omega = resolve_omega(config, h)?;
    report.omega = Some(omega);
    let reference_spec = SmootherSpec::lower(omega);
    let table = CostTable::new(reference_spec, config.mg_reference_nu);
    let factors = if config.cost_smoothing { norm_factors(config, h)? } else { Vec::new() };
    for &level in &config.levels {
        let dofs = h.level(level).system.n_dofs();
        let scale = factor_of(&factors, level);
        let measure = |spec: SmootherSpec, nu: usize, smoothing: bool| -> Result<(RateSample, Option<f64>, f64)> {
            let t = Instant::now();
            let mg = asymptotic_rate(h, &cycle_for(config, nu)?, spec, level)?;
            let norm = if smoothing && config.cost_smoothing {
                Some(smoothing_norm(h, level, spec, nu, config.smoothing_tol)?.value)
            } else {
                None
            };
            let sample = RateSample {
                spec,
                nu,
                smoothing_rate: norm.map(|n| n * scale),
                mg_rate: (!mg.diverged).then_some(mg.rate),
            };
            Ok((sample, norm, t.elapsed().as_secs_f64()))
        };
        let (mg_ref, _, _) = measure(reference_spec, config.mg_reference_nu, false)?;
        let sm_ref = if config.cost_smoothing {
            let n = smoothing_norm(h, level, reference_spec, config.sm_reference_nu, config.smoothing_tol)?.value;
            Some(n * scale)
        } else {
            None
        };
        let reference = RateSample {
            spec: reference_spec,
            nu: config.mg_reference_nu,
            smoothing_rate: None,
            mg_rate: mg_ref.mg_rate,
        };
        let sm_reference = RateSample {
            spec: reference_spec,
            nu: config.sm_reference_nu,
            smoothing_rate: sm_ref,
            mg_rate: None,
        };
        let cells: Vec<(SmootherSpec, usize)> = config
            .variants
            .iter()
            .flat_map(|v| config.nu.iter().map(move |&nu| (config.spec(v, omega), nu)))
            .collect();
        let results = run_cells(&cells, config.parallel, |&(spec, nu)| measure(spec, nu, true))?;
        for ((spec, nu), (sample, norm, secs)) in cells.into_iter().zip(results) {
            let mg = relative_costs(&table, &sample, &reference)?;
            let sm = relative_costs(&table, &sample, &sm_reference)?;
            let mut row = Row::new(spec, level, dofs, nu);
            row.cycle = Some(cycle_for(config, nu)?.name());
            row.rate = sample.mg_rate;
            row.diverged = Some(sample.mg_rate.is_none());
            row.norm = norm;
            row.norm_scaled = sample.smoothing_rate;
            row.eta = Some(eta(nu));
            row.c = Some(mg.c_abs);
            row.c_bar = Some(mg.c_bar);
            row.c_mg = mg.c_mg;
            row.c_sm = sm.c_sm;
            row.wall_seconds = secs;
            report.rows.push(row);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_cells_keeps_order() {
        let cells: Vec<usize> = (0..17).collect();
        let serial = run_cells(&cells, false, |&c| Ok(c * c)).unwrap();
        let parallel = run_cells(&cells, true, |&c| Ok(c * c)).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial[4], 16);
        assert!(run_cells(&cells, true, |&c| if c == 3 { Err(Error::ZeroStartVector) } else { Ok(c) }).is_err());
    }

    #[test]
    fn small_solve_table_is_deterministic() {
        let mut c = ExperimentConfig::new(Command::SolveTable);
        c.apply_overrides(["levels=1", "nu=2,4", "variants=lower"]).unwrap();
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        let strip = |r: &RunReport| {
            r.to_csv()
                .lines()
                .map(|l| l.rsplit_once(',').map_or(l, |x| x.0).to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.rows.len(), 2);
        assert!(a.rows.iter().all(|r| r.converged == Some(true)));
        assert_eq!(a.exit_code(), EXIT_OK);
        for t in &a.traces {
            assert_eq!(t.relative_residuals[0], 1.0);
        }
    }
}
