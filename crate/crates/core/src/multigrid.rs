//! V- and W-cycles with an exact coarse solve.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::SaddlePointSystem;
use crate::dense::{DenseMatrix, LuFactorization};
use crate::error::{check_len, Error, Result};
use crate::hierarchy::Hierarchy;
use crate::smoother::{Smoother, SmootherSpec};
use crate::vector::all_finite;

/// Which smoother runs after the coarse-grid correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostSmoother {
    /// The pre-smoother again.
    Same,
    /// The method with preconditioner Pᵀ (P_u after P_ℓ, and so on).
    Adjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    /// 1 for V-cycles, 2 for W-cycles.
    pub gamma: usize,
    pub nu_total: usize,
    pub pre_steps: usize,
    pub post_steps: usize,
    pub post_smoother: PostSmoother,
    pub coarse_level: usize,
    pub max_iterations: usize,
    /// Relative reduction of the dual residual norm that ends a solve.
    pub epsilon: f64,
    pub seed: u64,
}

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 200;
pub const DEFAULT_SEED: u64 = 20_190_418;
/// A solve is declared divergent once the residual exceeds this multiple of
/// the initial one.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

impl CycleSpec {
    /// ν smoothing steps split as ν − ⌊ν/2⌋ before and ⌊ν/2⌋ after the
    /// coarse-grid correction.
    pub fn new(gamma: usize, nu: usize) -> Result<Self> {
        if !(1..=2).contains(&gamma) {
            return Err(Error::Config {
                key: "gamma".into(),
                message: format!("must be 1 or 2, got {gamma}"),
            });
        }
        Ok(Self {
            gamma,
            nu_total: nu,
            pre_steps: nu - nu / 2,
            post_steps: nu / 2,
            post_smoother: PostSmoother::Same,
            coarse_level: 0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            epsilon: DEFAULT_EPSILON,
            seed: DEFAULT_SEED,
        })
    }

    pub fn v_cycle(nu: usize) -> Self {
        Self::new(1, nu).expect("gamma = 1 is valid")
    }

    pub fn w_cycle(nu: usize) -> Self {
        Self::new(2, nu).expect("gamma = 2 is valid")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_post_smoother(mut self, post: PostSmoother) -> Self {
        self.post_smoother = post;
        self
    }

    pub fn name(&self) -> String {
        let c = if self.gamma == 1 { "V" } else { "W" };
        format!("{c}({},{})", self.pre_steps, self.post_steps)
    }
}

/// Dense LU of the coarse saddle system bordered by the constraint
/// 1ᵀM_q p = 0 through one Lagrange multiplier.
#[derive(Debug, Clone)]
pub struct CoarseSolver {
    lu: LuFactorization,
    n_u: usize,
    n_p: usize,
}

impl CoarseSolver {
    pub fn new(system: &SaddlePointSystem, mq_ones: &[f64]) -> Result<Self> {
        let (n_u, n_p) = (system.n_velocity_dofs(), system.n_pressure_dofs());
        check_len("constraint vector", n_p, mq_ones.len())?;
        let k = system.to_dense();
        let n = n_u + n_p;
        let mut aug = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = k[(i, j)];
            }
        }
        for (i, &w) in mq_ones.iter().enumerate() {
            aug[(n_u + i, n)] = w;
            aug[(n, n_u + i)] = w;
        }
        Ok(Self {
            lu: LuFactorization::new(&aug)?,
            n_u,
            n_p,
        })
    }

    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("coarse f", self.n_u, f.len())?;
        check_len("coarse g", self.n_p, g.len())?;
        let mut rhs = Vec::with_capacity(self.n_u + self.n_p + 1);
        rhs.extend_from_slice(f);
        rhs.extend_from_slice(g);
        rhs.push(0.0);
        let x = self.lu.solve(&rhs)?;
        Ok((x[..self.n_u].to_vec(), x[self.n_u..self.n_u + self.n_p].to_vec()))
    }
}

/// One-shot exact solve of a saddle system with zero-mean pressure.
pub fn coarse_solve(system: &SaddlePointSystem, mq_ones: &[f64], f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    CoarseSolver::new(system, mq_ones)?.solve(f, g)
}

fn check_levels(hierarchy: &Hierarchy, cycle: &CycleSpec, top: usize) -> Result<()> {
    if top > hierarchy.max_level() || cycle.coarse_level > top {
        return Err(Error::LevelMismatch(format!(
            "cannot cycle from level {top} down to {} on a hierarchy of {} levels",
            cycle.coarse_level,
            hierarchy.levels.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
struct LevelWork {
    ru: Vec<f64>,
    rp: Vec<f64>,
    xu: Vec<f64>,
    xp: Vec<f64>,
    bu: Vec<f64>,
    bp: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Dual-norm residual ‖r‖_{L⁻¹}.
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    /// Entry 0 is the initial residual.
    pub residual_trace: Vec<TraceEntry>,
    /// Geometric-mean residual reduction per cycle.
    pub final_rate: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

/// Settings of the asymptotic rate estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    /// Ratios count only once the relative error is below this...
    pub upper: f64,
    /// ...and while it stays above this.
    pub lower: f64,
    /// Number of trailing ratios averaged.
    pub window: usize,
    /// Stop once the relative error falls below this.
    pub stop_below: f64,
    pub max_cycles: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            upper: 1e-4,
            lower: 1e-12,
            window: 5,
            stop_below: 1e-10,
            max_cycles: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub cycles: usize,
    /// Relative L-norm errors ‖e_k‖/‖e_0‖, starting with 1.
    pub errors: Vec<f64>,
    /// Fewer than `window` usable ratios were available.
    pub underflow: bool,
    pub diverged: bool,
}

/// Multigrid over levels coarse_level..=top of a hierarchy.
pub struct MultigridSolver<'h> {
    hierarchy: &'h Hierarchy,
    cycle: CycleSpec,
    top: usize,
    pre: Vec<Smoother<'h>>,
    post: Vec<Smoother<'h>>,
    coarse: CoarseSolver,
    work: Vec<LevelWork>,
}

impl<'h> MultigridSolver<'h> {
    pub fn new(hierarchy: &'h Hierarchy, cycle: CycleSpec, spec: SmootherSpec, top: usize) -> Result<Self> {
        check_levels(hierarchy, &cycle, top)?;
        let smoothers = (cycle.coarse_level + 1..=top)
            .map(|l| {
                let lv = hierarchy.level(l);
                Smoother::new(spec, &lv.system, &lv.norm.mq.diagonal())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_smoothers(hierarchy, cycle, top, smoothers)
    }

    /// `smoothers[i]` acts on level coarse_level + 1 + i.
    pub fn with_smoothers(hierarchy: &'h Hierarchy, cycle: CycleSpec, top: usize, smoothers: Vec<Smoother<'h>>) -> Result<Self> {
        check_levels(hierarchy, &cycle, top)?;
        check_len("smoothers", top - cycle.coarse_level, smoothers.len())?;
        let post = smoothers
            .iter()
            .map(|s| match cycle.post_smoother {
                PostSmoother::Same => s.clone(),
                PostSmoother::Adjoint => s.adjoint(),
            })
            .collect();
        let cl = hierarchy.level(cycle.coarse_level);
        let coarse = CoarseSolver::new(&cl.system, cl.norm.mq_ones())?;
        let work = (cycle.coarse_level + 1..=top)
            .map(|l| {
                let s = &hierarchy.level(l).system;
                let c = &hierarchy.level(l - 1).system;
                LevelWork {
                    ru: vec![0.0; s.n_velocity_dofs()],
                    rp: vec![0.0; s.n_pressure_dofs()],
                    xu: vec![0.0; c.n_velocity_dofs()],
                    xp: vec![0.0; c.n_pressure_dofs()],
                    bu: vec![0.0; c.n_velocity_dofs()],
                    bp: vec![0.0; c.n_pressure_dofs()],
                }
            })
            .collect();
        Ok(Self {
            hierarchy,
            cycle,
            top,
            pre: smoothers,
            post,
            coarse,
            work,
        })
    }

    pub fn cycle_spec(&self) -> &CycleSpec {
        &self.cycle
    }

    pub fn top_level(&self) -> usize {
        self.top
    }

    /// One cycle on the top level followed by the zero-mean projection of
    /// the pressure.
    pub fn cycle(&mut self, u: &mut [f64], p: &mut [f64], f: &[f64], g: &[f64]) -> Result<()> {
        self.cycle_at(self.top, u, p, f, g)?;
        self.hierarchy.level(self.top).norm.project_mean(p);
        Ok(())
    }

    fn cycle_at(&mut self, l: usize, u: &mut [f64], p: &mut [f64], f: &[f64], g: &[f64]) -> Result<()> {
        let coarse = self.cycle.coarse_level;
        if l == coarse {
            let (cu, cp) = self.coarse.solve(f, g)?;
            u.copy_from_slice(&cu);
            p.copy_from_slice(&cp);
            return Ok(());
        }
        let idx = l - coarse - 1;
        for _ in 0..self.cycle.pre_steps {
            self.pre[idx].step(u, p, f, g);
        }
        let level = self.hierarchy.level(l);
        let transfer = level.transfer.as_ref().expect("levels above 0 carry a transfer");
        let mut w = std::mem::take(&mut self.work[idx]);
        level.system.residual_into(u, p, f, g, &mut w.ru, &mut w.rp);
        transfer.velocity.mul_transpose_into(&w.ru, &mut w.bu);
        transfer.pressure.mul_transpose_into(&w.rp, &mut w.bp);
        w.xu.fill(0.0);
        w.xp.fill(0.0);
        // An exact coarse solve does not improve when repeated.
        let repeats = if l - 1 == coarse { 1 } else { self.cycle.gamma };
        let mut result = Ok(());
        for _ in 0..repeats {
            result = self.cycle_at(l - 1, &mut w.xu, &mut w.xp, &w.bu, &w.bp);
            if result.is_err() {
                break;
            }
        }
        transfer.velocity.mul_add(1.0, &w.xu, u);
        transfer.pressure.mul_add(1.0, &w.xp, p);
        self.work[idx] = w;
        result?;
        for _ in 0..self.cycle.post_steps {
            self.post[idx].step(u, p, f, g);
        }
        Ok(())
    }

    /// Random start in [0, 1] (pressure projected to zero mean).
    pub fn random_start(&self) -> (Vec<f64>, Vec<f64>) {
        let lv = self.hierarchy.level(self.top);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cycle.seed);
        let u: Vec<f64> = (0..lv.system.n_velocity_dofs()).map(|_| rng.gen::<f64>()).collect();
        let mut p: Vec<f64> = (0..lv.system.n_pressure_dofs()).map(|_| rng.gen::<f64>()).collect();
        lv.norm.project_mean(&mut p);
        (u, p)
    }

    /// Cycles from the random start until ‖r_k‖_{L⁻¹} ≤ ε‖r_0‖_{L⁻¹}. The
    /// right-hand side defaults to the assembled loads of the top level.
    pub fn solve(&mut self, rhs: Option<(&[f64], &[f64])>) -> Result<SolveResult> {
        let lv = self.hierarchy.level(self.top);
        let sys = &lv.system;
        let (f, mut g) = match rhs {
            Some((f, g)) => {
                check_len("solve f", sys.n_velocity_dofs(), f.len())?;
                check_len("solve g", sys.n_pressure_dofs(), g.len())?;
                (f.to_vec(), g.to_vec())
            }
            None => (sys.f.clone(), sys.g.clone()),
        };
        // Only pressure loads orthogonal to the constants are compatible.
        if !g.is_empty() {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            g.iter_mut().for_each(|v| *v -= mean);
        }
        let (mut u, mut p) = self.random_start();
        let mut ru = vec![0.0; u.len()];
        let mut rp = vec![0.0; p.len()];
        let residual = |u: &[f64], p: &[f64], ru: &mut [f64], rp: &mut [f64]| -> Result<f64> {
            sys.residual_into(u, p, &f, &g, ru, rp);
            if !all_finite(ru) || !all_finite(rp) {
                return Ok(f64::INFINITY);
            }
            lv.norm.dual_value_split(ru, rp)
        };
        let start = Instant::now();
        let r0 = residual(&u, &p, &mut ru, &mut rp)?;
        let mut trace = vec![TraceEntry {
            iteration: 0,
            residual: r0,
            seconds: 0.0,
        }];
        let mut converged = r0 == 0.0;
        let mut diverged = false;
        let mut k = 0;
        while !converged && k < self.cycle.max_iterations {
            k += 1;
            self.cycle(&mut u, &mut p, &f, &g)?;
            let r = residual(&u, &p, &mut ru, &mut rp)?;
            trace.push(TraceEntry {
                iteration: k,
                residual: r,
                seconds: start.elapsed().as_secs_f64(),
            });
            if !r.is_finite() || r > DIVERGENCE_FACTOR * r0 {
                diverged = true;
                break;
            }
            converged = r <= self.cycle.epsilon * r0;
        }
        if !converged && !diverged {
            diverged = true;
        }
        let last = trace.last().map_or(r0, |t| t.residual);
        let final_rate = if k > 0 && r0 > 0.0 { (last / r0).powf(1.0 / k as f64) } else { 0.0 };
        Ok(SolveResult {
            iterations: k,
            converged,
            diverged,
            residual_trace: trace,
            final_rate,
            u,
            p,
        })
    }

    /// Asymptotic L-norm contraction on the homogeneous problem, where the
    /// iterate is the error.
    pub fn asymptotic_rate(&mut self, opts: RateOptions) -> Result<RateEstimate> {
        let lv = self.hierarchy.level(self.top);
        let (mut u, mut p) = self.random_start();
        let zu = vec![0.0; u.len()];
        let zp = vec![0.0; p.len()];
        let e0 = lv.norm.value_split(&u, &p)?;
        let mut errors = vec![1.0];
        let mut diverged = false;
        for _ in 0..opts.max_cycles {
            self.cycle(&mut u, &mut p, &zu, &zp)?;
            let e = lv.norm.value_split(&u, &p)? / e0;
            errors.push(e);
            if !e.is_finite() || e > DIVERGENCE_FACTOR {
                diverged = true;
                break;
            }
            if e < opts.stop_below {
                break;
            }
        }
        let usable: Vec<f64> = errors
            .windows(2)
            .filter(|w| w[0] <= opts.upper && w[1] >= opts.lower && w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        let underflow = usable.len() < opts.window;
        let tail: Vec<f64> = if usable.is_empty() {
            // Fall back to the last ratios available at all.
            errors
                .windows(2)
                .filter(|w| w[0] > 0.0)
                .map(|w| w[1] / w[0])
                .collect()
        } else {
            usable
        };
        let take = tail.len().min(opts.window);
        let rate = if take == 0 {
            0.0
        } else {
            let s: f64 = tail[tail.len() - take..].iter().map(|r| r.ln()).sum();
            (s / take as f64).exp()
        };
        Ok(RateEstimate {
            rate,
            cycles: errors.len() - 1,
            errors,
            underflow,
            diverged,
        })
    }
}

/// Convenience wrapper: one solve on `level` with default loads.
pub fn solve(hierarchy: &Hierarchy, cycle: &CycleSpec, spec: SmootherSpec, level: usize) -> Result<SolveResult> {
    MultigridSolver::new(hierarchy, cycle.clone(), spec, level)?.solve(None)
}

/// Convenience wrapper around `MultigridSolver::asymptotic_rate`.
pub fn asymptotic_rate(hierarchy: &Hierarchy, cycle: &CycleSpec, spec: SmootherSpec, level: usize) -> Result<RateEstimate> {
    MultigridSolver::new(hierarchy, cycle.clone(), spec, level)?.asymptotic_rate(RateOptions::default())
}
