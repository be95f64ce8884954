//! Experiment configuration: a plain `key = value` file plus overrides.
//!
//! Lines starting with `#` are comments. Lists are comma separated and
//! integer lists also accept ranges such as `1..4` (inclusive).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::analysis::{DEFAULT_SIZES, DEFAULT_SYSTEMS, SMOOTHING_TOL};
use crate::error::{Error, Result};
use crate::multigrid::{PostSmoother, DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS, DEFAULT_SEED};
use crate::smoother::{AHatKind, SHatKind, SmootherClass, SmootherSpec, OMEGA_GS_C, OMEGA_SYMGS_C};

/// Damping of Ŝ = ω⁻¹ diag M_q used throughout the reference experiments.
pub const REFERENCE_OMEGA: f64 = 0.55849;
/// ‖𝒜‖_{L×L} of the reference smoothing-rate curves.
pub const REFERENCE_NORM_SCALE: f64 = 0.207996;
/// Display factor of the η reference curve.
pub const ETA_DISPLAY_SCALE: f64 = 1.0 / 70.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Omega,
    SmoothRate,
    RatesTable,
    SolveTable,
    Costs,
    VerifyTheorems,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Omega,
        Command::SmoothRate,
        Command::RatesTable,
        Command::SolveTable,
        Command::Costs,
        Command::VerifyTheorems,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Omega => "omega",
            Command::SmoothRate => "smooth-rate",
            Command::RatesTable => "rates-table",
            Command::SolveTable => "solve-table",
            Command::Costs => "costs",
            Command::VerifyTheorems => "verify-theorems",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| config_error("command", format!("unknown command `{s}`")))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// Damping of Ŝ = ω⁻¹ diag M_q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaChoice {
    Fixed(f64),
    /// `compute_omega` on level 0.
    Auto,
}

/// A smoother family without its damping value. Named aliases cover the
/// reference variants; `class:a_hat:s_hat` selects any other combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Variant {
    pub class: SmootherClass,
    pub a_hat: AHatKind,
    pub s_hat: SHatKind,
}

impl Variant {
    pub const fn new(class: SmootherClass, a_hat: AHatKind, s_hat: SHatKind) -> Self {
        Self { class, a_hat, s_hat }
    }

    /// Spec with ω for the mass-based Ŝ, the fixed S̃/S̃_s dampings, and α for
    /// Braess–Sarazin.
    pub fn spec(&self, omega: f64, alpha: f64) -> SmootherSpec {
        if self.class == SmootherClass::BraessSarazin {
            return SmootherSpec::braess_sarazin(alpha);
        }
        let w = self.s_hat.default_omega().unwrap_or(omega);
        SmootherSpec::new(self.class, self.a_hat, self.s_hat, w)
    }

    /// The five variants of the smoothing-rate and cost comparisons.
    pub fn comparison_set() -> Vec<Variant> {
        ["lower", "upper", "factorization", "symmetric-as", "symmetric"]
            .iter()
            .map(|s| s.parse().expect("built-in alias"))
            .collect()
    }
}

const ALIASES: [(&str, Variant); 10] = [
    ("diagonal", Variant::new(SmootherClass::Diagonal, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass)),
    ("lower", Variant::new(SmootherClass::Lower, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass)),
    ("upper", Variant::new(SmootherClass::Upper, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass)),
    (
        "factorization",
        Variant::new(SmootherClass::Factorization, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass),
    ),
    ("symmetric", Variant::new(SmootherClass::Symmetric, AHatKind::BackwardGs, SHatKind::DampedJacobiMass)),
    ("symmetric-as", Variant::new(SmootherClass::Symmetric, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass)),
    ("lower-st", Variant::new(SmootherClass::Lower, AHatKind::SymmetricGs, SHatKind::DampedGsC)),
    ("lower-sts", Variant::new(SmootherClass::Lower, AHatKind::SymmetricGs, SHatKind::DampedSymgsC)),
    ("braess-sarazin", Variant::new(SmootherClass::BraessSarazin, AHatKind::Jacobi, SHatKind::DampedJacobiMass)),
    ("bs", Variant::new(SmootherClass::BraessSarazin, AHatKind::Jacobi, SHatKind::DampedJacobiMass)),
];

fn parse_snake<T: serde::de::DeserializeOwned>(s: &str) -> Option<T> {
    serde_json::from_value(serde_json::Value::String(s.trim().replace('-', "_"))).ok()
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((_, v)) = ALIASES.iter().find(|(name, _)| *name == s) {
            return Ok(*v);
        }
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || config_error("variants", format!("unknown variant `{s}`"));
        let class: SmootherClass = parse_snake(parts[0]).ok_or_else(bad)?;
        let a_hat = match parts.get(1) {
            Some(a) => parse_snake(a).ok_or_else(bad)?,
            None => SmootherSpec::default_a_hat(class),
        };
        let s_hat = match parts.get(2) {
            Some(a) => parse_snake(a).ok_or_else(bad)?,
            None => SHatKind::DampedJacobiMass,
        };
        if parts.len() > 3 {
            return Err(bad());
        }
        Ok(Variant::new(class, a_hat, s_hat))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub levels: Vec<usize>,
    pub variants: Vec<Variant>,
    pub nu: Vec<usize>,
    /// 1 = V-cycle, 2 = W-cycle.
    pub gamma: usize,
    pub post_smoother: PostSmoother,
    pub omega: OmegaChoice,
    /// Power-method tolerance of `omega = auto` and of the omega command.
    pub omega_tol: f64,
    /// Damping of S̃ and S̃_s.
    pub omega_gs_c: f64,
    pub omega_symgs_c: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub smoothing_tol: f64,
    /// Smoothing norms are also reported rescaled so that ν = 0 takes this
    /// value; `none` disables rescaling.
    pub norm_scale: Option<f64>,
    pub eta_display_scale: f64,
    /// Reference configurations of c^SM and c^MG: P_ℓ(Â_s,Ŝ) at these ν.
    pub sm_reference_nu: usize,
    pub mg_reference_nu: usize,
    /// Whether the costs command also measures smoothing norms for c^SM.
    pub cost_smoothing: bool,
    pub theorem_systems: usize,
    pub theorem_sizes: Vec<(usize, usize)>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub parallel: bool,
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| config_error(key, format!("cannot parse `{}`", v.trim())))
}

fn parse_positive(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse_num(key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(config_error(key, format!("must be positive, got {x}")));
    }
    Ok(x)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(config_error(key, format!("expected a boolean, got `{other}`"))),
    }
}

/// `1,2,4` or `1..4` or a mix such as `0..3,6`.
pub fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b): (usize, usize) = (parse_num(key, a)?, parse_num(key, b)?);
            if a > b {
                return Err(config_error(key, format!("empty range `{item}`")));
            }
            out.extend(a..=b);
        } else {
            out.push(parse_num(key, item)?);
        }
    }
    if out.is_empty() {
        return Err(config_error(key, "empty list"));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Defaults of a command, matching the reference setup.
    pub fn new(command: Command) -> Self {
        let (levels, variants, nu) = match command {
            Command::Omega => (vec![0], vec!["lower"], vec![1]),
            Command::SmoothRate => (vec![3], vec!["lower", "upper", "factorization", "symmetric-as", "symmetric"], (0..=10).collect()),
            Command::RatesTable => (vec![2, 3, 4], vec!["lower", "symmetric"], vec![1, 2, 4, 6, 8]),
            Command::SolveTable => (vec![3], vec!["lower", "lower-sts", "lower-st"], vec![1, 2, 4, 6, 8]),
            Command::Costs => (vec![3], vec!["lower", "upper", "factorization", "symmetric-as", "symmetric"], vec![1, 2, 4, 6]),
            Command::VerifyTheorems => (vec![0], vec!["lower"], vec![1]),
        };
        Self {
            command,
            levels,
            variants: variants.iter().map(|s| s.parse().expect("built-in alias")).collect(),
            nu,
            gamma: 2,
            post_smoother: PostSmoother::Same,
            omega: OmegaChoice::Fixed(REFERENCE_OMEGA),
            omega_tol: 1e-6,
            omega_gs_c: OMEGA_GS_C,
            omega_symgs_c: OMEGA_SYMGS_C,
            alpha: 1.0,
            epsilon: DEFAULT_EPSILON,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: DEFAULT_SEED,
            smoothing_tol: SMOOTHING_TOL,
            norm_scale: Some(REFERENCE_NORM_SCALE),
            eta_display_scale: ETA_DISPLAY_SCALE,
            sm_reference_nu: 3,
            mg_reference_nu: 6,
            cost_smoothing: true,
            theorem_systems: DEFAULT_SYSTEMS,
            theorem_sizes: DEFAULT_SIZES.to_vec(),
            output: None,
            format: OutputFormat::Csv,
            parallel: false,
        }
    }

    /// Sets one key; the error names the offending key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let v = value.trim();
        match key {
            "command" => self.command = v.parse()?,
            "level" | "levels" => self.levels = parse_usize_list(key, v)?,
            "variant" | "variants" | "class" => {
                self.variants = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|_| config_error(key, format!("unknown variant `{s}`"))))
                    .collect::<Result<_>>()?;
                if self.variants.is_empty() {
                    return Err(config_error(key, "empty list"));
                }
            }
            "nu" => self.nu = parse_usize_list(key, v)?,
            "gamma" => {
                self.gamma = parse_num(key, v)?;
                if !matches!(self.gamma, 1 | 2) {
                    return Err(config_error(key, "must be 1 (V-cycle) or 2 (W-cycle)"));
                }
            }
            "cycle" => {
                self.gamma = match v.to_ascii_uppercase().as_str() {
                    "V" => 1,
                    "W" => 2,
                    _ => return Err(config_error(key, "must be V or W")),
                }
            }
            "post_smoother" => {
                self.post_smoother = match v {
                    "same" => PostSmoother::Same,
                    "adjoint" => PostSmoother::Adjoint,
                    _ => return Err(config_error(key, "must be `same` or `adjoint`")),
                }
            }
            "omega" => {
                self.omega = if v == "auto" {
                    OmegaChoice::Auto
                } else {
                    OmegaChoice::Fixed(parse_positive(key, v)?)
                }
            }
            "omega_tol" => self.omega_tol = parse_positive(key, v)?,
            "omega_gs_c" => self.omega_gs_c = parse_positive(key, v)?,
            "omega_symgs_c" => self.omega_symgs_c = parse_positive(key, v)?,
            "alpha" => self.alpha = parse_positive(key, v)?,
            "epsilon" => self.epsilon = parse_positive(key, v)?,
            "max_iterations" => {
                self.max_iterations = parse_num(key, v)?;
                if self.max_iterations == 0 {
                    return Err(config_error(key, "must be at least 1"));
                }
            }
            "seed" => self.seed = parse_num(key, v)?,
            "smoothing_tol" => self.smoothing_tol = parse_positive(key, v)?,
            "norm_scale" => self.norm_scale = if v == "none" { None } else { Some(parse_positive(key, v)?) },
            "eta_display_scale" => self.eta_display_scale = parse_positive(key, v)?,
            "sm_reference_nu" => self.sm_reference_nu = parse_num(key, v)?,
            "mg_reference_nu" => self.mg_reference_nu = parse_num(key, v)?,
            "cost_smoothing" => self.cost_smoothing = parse_bool(key, v)?,
            "systems" | "theorem_systems" => self.theorem_systems = parse_num(key, v)?,
            "sizes" | "theorem_sizes" => {
                self.theorem_sizes = v
                    .split(',')
                    .map(|item| {
                        let (n, m) = item
                            .split_once('+')
                            .ok_or_else(|| config_error(key, format!("expected n+m, got `{item}`")))?;
                        let (n, m) = (parse_num(key, n)?, parse_num(key, m)?);
                        if n == 0 || m == 0 {
                            return Err(config_error(key, "block sizes must be positive"));
                        }
                        Ok((n, m))
                    })
                    .collect::<Result<_>>()?;
            }
            "output" => self.output = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "format" => {
                self.format = match v {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    "both" => OutputFormat::Both,
                    _ => return Err(config_error(key, "must be csv, json or both")),
                }
            }
            "parallel" => self.parallel = parse_bool(key, v)?,
            _ => return Err(config_error(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_error(line, format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error("config", format!("{}: {e}", path.display())))?;
        self.apply_str(&text)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<'a>(&mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| config_error(o, "expected key=value"))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn max_level(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    /// Spec of a variant given the resolved mass-based ω.
    pub fn spec(&self, variant: &Variant, omega: f64) -> SmootherSpec {
        let mut spec = variant.spec(omega, self.alpha);
        match spec.s_hat {
            SHatKind::DampedGsC => spec.omega = self.omega_gs_c,
            SHatKind::DampedSymgsC => spec.omega = self.omega_symgs_c,
            SHatKind::DampedJacobiMass => {}
        }
        spec
    }

    /// Checks combinations that the individual keys cannot.
    pub fn validate(&self) -> Result<()> {
        for v in &self.variants {
            self.spec(v, REFERENCE_OMEGA)
                .validate()
                .map_err(|e| config_error("variants", e.to_string()))?;
        }
        let needs_positive_nu = matches!(self.command, Command::RatesTable | Command::SolveTable | Command::Costs);
        if needs_positive_nu && self.nu.contains(&0) {
            return Err(config_error("nu", "multigrid runs need at least one smoothing step"));
        }
        if matches!(self.command, Command::RatesTable | Command::SolveTable | Command::Costs) && self.levels.contains(&0) {
            return Err(config_error("levels", "level 0 is the coarse level; multigrid needs level >= 1"));
        }
        if self.mg_reference_nu == 0 || self.sm_reference_nu == 0 {
            return Err(config_error("mg_reference_nu", "reference ν must be at least 1"));
        }
        Ok(())
    }
}
