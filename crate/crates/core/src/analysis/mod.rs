//! Smoothing norms, the η bound, cost model and dense theorem checks.

mod cost;
mod eta;
mod smoothing;
mod theorems;

pub use cost::{relative_costs, CostTable, CostWeights, RateSample, RelativeCost, StepCost};
pub use eta::{eta, eta_upper_bound};
pub use smoothing::{
    dense_smoothing_norm, smoothing_norm, smoothing_norm_with, smoothing_rate_report, SmoothingNorm,
    SmoothingRateReport, SMOOTHING_MAX_ITER, SMOOTHING_SEED, SMOOTHING_TOL,
};
pub use theorems::{
    verify_theorems, FamilySummary, TheoremCheck, TheoremFamily, TheoremReport, DEFAULT_SIZES, DEFAULT_SYSTEMS,
    MAX_NU, MAX_RESAMPLE, THEOREM_MARGIN,
};
