//! The smoothing-rate norm ‖𝒜 Mᵛ‖_{L×L} = ‖L^{-1/2} 𝒜 Mᵛ L^{-1/2}‖₂.

use std::cell::RefCell;

use serde::Serialize;

use crate::analysis::eta::eta;
use crate::dense::{spectral_norm, symmetric_function, DenseMatrix};
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::iterative::lanczos_with_weight;
use crate::norm::NormOperator;
use crate::smoother::{Smoother, SmootherSpec};

/// Relative Ritz-residual tolerance on the dominant eigenvalue of K = L⁻¹GᵀL⁻¹G.
pub const SMOOTHING_TOL: f64 = 1e-5;
pub const SMOOTHING_MAX_ITER: usize = 400;
pub const SMOOTHING_SEED: u64 = 4242;

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingNorm {
    pub nu: usize,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingRateReport {
    pub level: usize,
    pub label: String,
    pub spec: SmootherSpec,
    pub nu_list: Vec<usize>,
    pub norms: Vec<f64>,
    /// η(ν) for the same ν.
    pub eta_bound: Vec<f64>,
    pub converged: Vec<bool>,
}

/// ‖𝒜 Mᵛ‖_{L×L} on one hierarchy level.
pub fn smoothing_norm(hierarchy: &Hierarchy, level: usize, spec: SmootherSpec, nu: usize, tol: f64) -> Result<SmoothingNorm> {
    let lv = hierarchy.level(level);
    let mut s = Smoother::new(spec, &lv.system, &lv.norm.mq.diagonal())?;
    smoothing_norm_with(&mut s, &lv.norm, nu, tol, SMOOTHING_MAX_ITER, SMOOTHING_SEED)
}

/// Lanczos on K = L⁻¹ Gᵀ L⁻¹ G with G = 𝒜Mᵛ, which is self-adjoint in the
/// L inner product; the norm is √λ_max(K).
pub fn smoothing_norm_with(
    smoother: &mut Smoother,
    norm: &NormOperator,
    nu: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SmoothingNorm> {
    let sys = smoother.system();
    let (n, m) = (sys.n_velocity_dofs(), sys.n_pressure_dofs());
    if norm.n_dofs() != n + m {
        return Err(Error::DimensionMismatch {
            context: "smoothing norm",
            expected: n + m,
            actual: norm.n_dofs(),
        });
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let mut w = vec![0.0; n + m];
    let mut g = vec![0.0; n + m];
    let mut apply = |x: &[f64], y: &mut [f64]| {
        if failure.borrow().is_some() {
            y.fill(0.0);
            return;
        }
        w.copy_from_slice(x);
        {
            let (wu, wp) = w.split_at_mut(n);
            for _ in 0..nu {
                smoother.iteration_operator_apply(wu, wp);
            }
        }
        let (wu, wp) = w.split_at(n);
        {
            let (gu, gp) = g.split_at_mut(n);
            sys.apply_into(wu, wp, gu, gp);
        }
        let r = norm.inverse_apply_into(&g, &mut w).and_then(|()| {
            {
                // 𝒜 is symmetric, so Gᵀ = (Mᵀ)ᵛ 𝒜.
                let (wu, wp) = w.split_at(n);
                let (gu, gp) = g.split_at_mut(n);
                sys.apply_into(wu, wp, gu, gp);
            }
            let (gu, gp) = g.split_at_mut(n);
            for _ in 0..nu {
                smoother.iteration_operator_transpose_apply(gu, gp)?;
            }
            norm.inverse_apply_into(&g, y)
        });
        if let Err(e) = r {
            *failure.borrow_mut() = Some(e);
            y.fill(0.0);
        }
    };
    let r = lanczos_with_weight(&mut apply, |x, y| norm.apply_into(x, y), n + m, tol, max_iter, seed)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(SmoothingNorm {
        nu,
        value: r.value.max(0.0).sqrt(),
        iterations: r.iterations,
        converged: r.converged,
    })
}

/// Smoothing norms for a list of ν on one level.
pub fn smoothing_rate_report(
    hierarchy: &Hierarchy,
    level: usize,
    spec: SmootherSpec,
    nu_list: &[usize],
    tol: f64,
) -> Result<SmoothingRateReport> {
    let lv = hierarchy.level(level);
    let mut s = Smoother::new(spec, &lv.system, &lv.norm.mq.diagonal())?;
    let mut norms = Vec::with_capacity(nu_list.len());
    let mut converged = Vec::with_capacity(nu_list.len());
    for &nu in nu_list {
        let r = smoothing_norm_with(&mut s, &lv.norm, nu, tol, SMOOTHING_MAX_ITER, SMOOTHING_SEED)?;
        norms.push(r.value);
        converged.push(r.converged);
    }
    Ok(SmoothingRateReport {
        level,
        label: spec.label(),
        spec,
        nu_list: nu_list.to_vec(),
        norms,
        eta_bound: nu_list.iter().map(|&nu| eta(nu)).collect(),
        converged,
    })
}

/// Dense reference: builds 𝒜, M and L explicitly and takes the largest
/// singular value of L^{-1/2} 𝒜 Mᵛ L^{-1/2}. Small levels only.
pub fn dense_smoothing_norm(smoother: &mut Smoother, norm: &NormOperator, nu: usize) -> Result<f64> {
    let sys = smoother.system();
    let n = sys.n_velocity_dofs();
    let dim = sys.n_dofs();
    let mut mv = DenseMatrix::identity(dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e.fill(0.0);
        e[j] = 1.0;
        let (eu, ep) = e.split_at_mut(n);
        for _ in 0..nu {
            smoother.iteration_operator_apply(eu, ep);
        }
        mv.set_column(j, &e);
    }
    let mut l = DenseMatrix::zeros(dim, dim);
    for j in 0..dim {
        e.fill(0.0);
        e[j] = 1.0;
        l.set_column(j, &norm.apply(&e)?);
    }
    let l_inv_sqrt = symmetric_function(&l.symmetrized(), |x| 1.0 / x.sqrt());
    let g = sys.to_dense().matmul(&mv);
    Ok(spectral_norm(&l_inv_sqrt.matmul(&g).matmul(&l_inv_sqrt)))
}
