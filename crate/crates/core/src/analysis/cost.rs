//! Operation-count cost model and relative costs of smoothers and cycles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::smoother::{AHatKind, SHatKind, SmootherClass, SmootherSpec};

/// Scalar matrix-vector multiplication weights. A system mat-vec counts 10.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostWeights {
    pub a: f64,
    pub b: f64,
    pub b_t: f64,
    pub c: f64,
    /// One triangular sweep of the velocity block.
    pub triangular_sweep: f64,
    pub diagonal: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            a: 3.0,
            b: 3.0,
            b_t: 3.0,
            c: 1.0,
            triangular_sweep: 1.5,
            diagonal: 0.0,
        }
    }
}

impl CostWeights {
    pub fn system_matvec(&self) -> f64 {
        self.a + self.b + self.b_t + self.c
    }

    /// Â⁻¹ applied in place to f − Au − Bᵀp, excluding the Bᵀp product.
    /// A Gauss–Seidel sweep folds the multiplication by A into the sweep:
    /// the strict upper part costs as much as the triangular solve.
    fn velocity_sweep(&self, a_hat: AHatKind) -> f64 {
        match a_hat {
            AHatKind::Jacobi => self.a + self.diagonal,
            AHatKind::ForwardGs | AHatKind::BackwardGs => 2.0 * self.triangular_sweep,
            AHatKind::SymmetricGs => 4.0 * self.triangular_sweep,
        }
    }

    fn velocity_update(&self, a_hat: AHatKind) -> f64 {
        self.b_t + self.velocity_sweep(a_hat)
    }

    /// Ŝ⁻¹(g − Bu + Cp). Sweeps on C fold the product with C the same way.
    fn pressure_update(&self, s_hat: SHatKind) -> f64 {
        let c_part = match s_hat {
            SHatKind::DampedJacobiMass => self.c + self.diagonal,
            SHatKind::DampedGsC => self.c,
            SHatKind::DampedSymgsC => 2.0 * self.c,
        };
        self.b + c_part
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepCost {
    /// First step of a pre- or post-smoothing phase.
    pub first: f64,
    /// Later steps, which reuse f − Bᵀp from the previous step.
    pub subsequent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostTable {
    pub weights: CostWeights,
    /// Reference configuration of the relative costs.
    pub reference: (SmootherSpec, usize),
}

impl CostTable {
    pub fn new(reference: SmootherSpec, nu: usize) -> Self {
        Self {
            weights: CostWeights::default(),
            reference: (reference, nu),
        }
    }

    /// Scalar multiplications of one smoothing step.
    pub fn step_cost(&self, spec: &SmootherSpec) -> Result<StepCost> {
        let w = &self.weights;
        let vel = w.velocity_update(spec.a_hat);
        let pres = w.pressure_update(spec.s_hat);
        match spec.class {
            SmootherClass::Diagonal | SmootherClass::Lower | SmootherClass::Upper => Ok(StepCost {
                first: vel + pres,
                subsequent: vel + pres,
            }),
            // Two velocity updates; the second one's f − Bᵀp_{k+1} is the
            // next step's starting residual.
            SmootherClass::Factorization | SmootherClass::Symmetric => Ok(StepCost {
                first: 2.0 * vel + pres,
                subsequent: 2.0 * vel + pres - w.b_t,
            }),
            SmootherClass::BraessSarazin => Err(Error::InvalidSpec(
                "the cost model does not cover the inner Schur solve of Braess-Sarazin".into(),
            )),
        }
    }

    /// Scalar multiplications of `steps` consecutive steps.
    pub fn phase_cost(&self, spec: &SmootherSpec, steps: usize) -> Result<f64> {
        let s = self.step_cost(spec)?;
        Ok(match steps {
            0 => 0.0,
            k => s.first + (k - 1) as f64 * s.subsequent,
        })
    }

    /// c_i(ν) in system mat-vecs, with ν split into pre- and post-smoothing.
    pub fn smoother_cost(&self, spec: &SmootherSpec, nu: usize) -> Result<f64> {
        let pre = nu - nu / 2;
        let total = self.phase_cost(spec, pre)? + self.phase_cost(spec, nu / 2)?;
        Ok(total / self.weights.system_matvec())
    }

    /// c̄_i(ν) = c_i(ν) + 1, the extra system mat-vec being the residual.
    pub fn cycle_cost(&self, spec: &SmootherSpec, nu: usize) -> Result<f64> {
        Ok(self.smoother_cost(spec, nu)? + 1.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RelativeCost {
    pub label: String,
    pub nu: usize,
    pub c_abs: f64,
    pub c_bar: f64,
    /// None when a smoothing rate is missing or not in (0, 1).
    pub c_sm: Option<f64>,
    /// None when a convergence rate is missing or not in (0, 1).
    pub c_mg: Option<f64>,
}

/// Rates measured for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSample {
    pub spec: SmootherSpec,
    pub nu: usize,
    pub smoothing_rate: Option<f64>,
    pub mg_rate: Option<f64>,
}

fn log_rate(r: Option<f64>) -> Option<f64> {
    r.filter(|&r| r > 0.0 && r < 1.0).map(f64::ln)
}

/// c^SM = (c_i/ln η_i)(ln η_ref/c_ref) and c^MG = (c̄_i/ln ρ_i)(ln ρ_ref/c̄_ref).
pub fn relative_costs(table: &CostTable, sample: &RateSample, reference: &RateSample) -> Result<RelativeCost> {
    let c = table.smoother_cost(&sample.spec, sample.nu)?;
    let c_bar = c + 1.0;
    let c_ref = table.smoother_cost(&reference.spec, reference.nu)?;
    let c_bar_ref = c_ref + 1.0;
    let ratio = |num: f64, den: f64, li: Option<f64>, lref: Option<f64>| match (li, lref) {
        (Some(li), Some(lr)) => Some(num / li * lr / den),
        _ => None,
    };
    Ok(RelativeCost {
        label: sample.spec.label(),
        nu: sample.nu,
        c_abs: c,
        c_bar,
        c_sm: ratio(c, c_ref, log_rate(sample.smoothing_rate), log_rate(reference.smoothing_rate)),
        c_mg: ratio(c_bar, c_bar_ref, log_rate(sample.mg_rate), log_rate(reference.mg_rate)),
    })
}
