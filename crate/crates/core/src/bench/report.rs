//! Run reports and their CSV, JSON and figure-data renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{eta, FamilySummary, TheoremReport};
use crate::bench::config::{Command, ExperimentConfig};
use crate::error::{Error, Result};
use crate::smoother::{OmegaEstimate, SmootherSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_THEOREM: i32 = 4;

/// One (variant, level, ν) cell. Fields a command does not measure are None.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub variant: String,
    pub spec: SmootherSpec,
    /// The nonsymmetric S̃ is outside the convergence theory.
    pub experimental: bool,
    pub level: usize,
    pub dofs: usize,
    pub nu: usize,
    pub cycle: Option<String>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub diverged: Option<bool>,
    pub rate: Option<f64>,
    pub norm: Option<f64>,
    pub norm_scaled: Option<f64>,
    pub eta: Option<f64>,
    pub lambda_max: Option<f64>,
    pub c: Option<f64>,
    pub c_bar: Option<f64>,
    pub c_sm: Option<f64>,
    pub c_mg: Option<f64>,
    /// Excluded from every comparison.
    pub wall_seconds: f64,
}

impl Row {
    pub fn new(spec: SmootherSpec, level: usize, dofs: usize, nu: usize) -> Self {
        Self {
            variant: spec.label(),
            spec,
            experimental: spec.s_hat.is_experimental(),
            level,
            dofs,
            nu,
            cycle: None,
            iterations: None,
            converged: None,
            diverged: None,
            rate: None,
            norm: None,
            norm_scaled: None,
            eta: None,
            lambda_max: None,
            c: None,
            c_bar: None,
            c_sm: None,
            c_mg: None,
            wall_seconds: 0.0,
        }
    }

    fn sort_key(&self) -> impl Ord {
        (self.spec.class, self.spec.a_hat, self.spec.s_hat, self.level, self.nu)
    }
}

/// Relative residuals of one solve.
#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub variant: String,
    pub level: usize,
    pub nu: usize,
    pub cycle: String,
    /// ‖r_k‖/‖r_0‖ for k = 0, 1, …
    pub relative_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaRun {
    pub level: usize,
    pub estimate: OmegaEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub build_id: String,
    pub version: String,
    pub seed: u64,
    pub date: String,
}

impl Provenance {
    pub fn now(seed: u64) -> Self {
        Self {
            build_id: env!("UZAWA_BUILD_ID").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            date: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    /// Resolved damping of Ŝ = ω⁻¹ diag M_q.
    pub omega: Option<f64>,
    pub rows: Vec<Row>,
    pub traces: Vec<Trace>,
    pub omega_runs: Vec<OmegaRun>,
    pub theorems: Option<TheoremReport>,
    pub theorem_summary: Vec<FamilySummary>,
    pub provenance: Provenance,
}

/// A figure as (x, series, value) CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub name: &'static str,
    pub csv: String,
}

const ROW_HEADER: &str = "variant,experimental,level,dofs,nu,cycle,iterations,converged,diverged,omega,rate,norm,norm_scaled,eta,lambda_max,c,c_bar,c_sm,c_mg,wall_seconds";
const THEOREM_HEADER: &str = "family,system,n,m,nu,lhs,rhs,passed,note";
const FIGURE_HEADER: &str = "x,series,value";

/// Six significant digits, `.` as decimal separator.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new digit (9.999995 → 10.00000).
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

/// Quotes a field that contains a separator or quote.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

impl RunReport {
    pub fn new(config: ExperimentConfig) -> Self {
        let seed = config.seed;
        Self {
            config,
            omega: None,
            rows: Vec::new(),
            traces: Vec::new(),
            omega_runs: Vec::new(),
            theorems: None,
            theorem_summary: Vec::new(),
            provenance: Provenance::now(seed),
        }
    }

    pub fn sort_rows(&mut self) {
        self.rows.sort_by_key(|a| a.sort_key());
    }

    pub fn any_diverged(&self) -> bool {
        self.rows.iter().any(|r| r.diverged == Some(true))
    }

    pub fn theorem_violations(&self) -> usize {
        self.theorems.as_ref().map_or(0, |t| t.violations().count())
    }

    /// 4 on a theorem violation, 3 when a solve-table run diverged, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.theorem_violations() > 0 {
            EXIT_THEOREM
        } else if self.config.command == Command::SolveTable && self.any_diverged() {
            EXIT_DIVERGED
        } else {
            EXIT_OK
        }
    }

    /// Main table: theorem checks for verify-theorems, cells otherwise.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if let Some(t) = &self.theorems {
            s.push_str(THEOREM_HEADER);
            s.push('\n');
            for c in &t.checks {
                let family = serde_json::to_value(c.family).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{family},{},{},{},{},{},{},{},{}",
                    c.system,
                    c.n,
                    c.m,
                    opt(c.nu, |n| n.to_string()),
                    fmt_sig6(c.lhs),
                    fmt_sig6(c.rhs),
                    c.passed,
                    csv_field(c.note)
                );
            }
            return s;
        }
        s.push_str(ROW_HEADER);
        s.push('\n');
        for r in &self.rows {
            let f = |v: Option<f64>| opt(v, fmt_sig6);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(&r.variant),
                r.experimental,
                r.level,
                r.dofs,
                r.nu,
                csv_field(r.cycle.as_deref().unwrap_or_default()),
                opt(r.iterations, |n| n.to_string()),
                opt(r.converged, |b| b.to_string()),
                opt(r.diverged, |b| b.to_string()),
                fmt_sig6(r.spec.omega),
                f(r.rate),
                f(r.norm),
                f(r.norm_scaled),
                f(r.eta),
                f(r.lambda_max),
                f(r.c),
                f(r.c_bar),
                f(r.c_sm),
                f(r.c_mg),
                fmt_sig6(r.wall_seconds),
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes the report next to `prefix` (`prefix.csv`, `prefix.json`, and
    /// `prefix.<figure>.csv`) and returns the written paths.
    pub fn write(&self, prefix: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let with_ext = |ext: &str| {
            let mut p = prefix.as_os_str().to_owned();
            p.push(ext);
            PathBuf::from(p)
        };
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        if self.config.format.csv() {
            let p = with_ext(".csv");
            std::fs::write(&p, self.to_csv())?;
            written.push(p);
        }
        if self.config.format.json() {
            let p = with_ext(".json");
            std::fs::write(&p, self.to_json()? + "\n")?;
            written.push(p);
        }
        for fig in emit_figure_data(self) {
            let p = with_ext(&format!(".{}.csv", fig.name));
            std::fs::write(&p, fig.csv)?;
            written.push(p);
        }
        Ok(written)
    }
}

fn figure(name: &'static str, points: impl IntoIterator<Item = (String, String, f64)>) -> FigureData {
    let mut csv = String::from(FIGURE_HEADER);
    csv.push('\n');
    for (x, series, value) in points {
        let _ = writeln!(csv, "{x},{},{}", csv_field(&series), fmt_sig6(value));
    }
    FigureData { name, csv }
}

/// Plot data for the smoothing-rate curves, relative costs and residual
/// histories. Every figure is emitted; absent data gives a header-only file.
pub fn emit_figure_data(report: &RunReport) -> Vec<FigureData> {
    let series = |r: &Row| format!("{} L{}", r.variant, r.level);
    let mut smoothing: Vec<(String, String, f64)> = report
        .rows
        .iter()
        .filter_map(|r| r.norm_scaled.or(r.norm).map(|v| (r.nu.to_string(), series(r), v)))
        .collect();
    if !smoothing.is_empty() && report.config.command == Command::SmoothRate {
        let mut nus: Vec<usize> = report.rows.iter().filter(|r| r.norm.is_some()).map(|r| r.nu).collect();
        nus.sort_unstable();
        nus.dedup();
        let scale = report.config.eta_display_scale;
        smoothing.extend(nus.into_iter().map(|nu| (nu.to_string(), "eta".to_string(), scale * eta(nu))));
    }
    let costs = report.rows.iter().flat_map(|r| {
        let mut v = Vec::new();
        if let Some(c) = r.c_sm {
            v.push((r.nu.to_string(), format!("{} c_sm", series(r)), c));
        }
        if let Some(c) = r.c_mg {
            v.push((r.nu.to_string(), format!("{} c_mg", series(r)), c));
        }
        v
    });
    let residuals = report.traces.iter().flat_map(|t| {
        let name = format!("{} {} nu={} L{}", t.variant, t.cycle, t.nu, t.level);
        t.relative_residuals
            .iter()
            .enumerate()
            .map(move |(k, &r)| (k.to_string(), name.clone(), r))
    });
    vec![
        figure("smoothing_rates", smoothing),
        figure("relative_costs", costs),
        figure("residuals", residuals),
    ]
}
