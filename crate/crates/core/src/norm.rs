//! The mesh-dependent norm L = diag(h⁻² M_v, M_q) and its dual.

use crate::error::{check_len, Error, Result};
use crate::iterative::cg_solve_into;
use crate::sparse::SparseMatrix;
use crate::vector::dot;

/// Tolerance of the mass solves behind every L⁻¹ application.
pub const MASS_SOLVE_TOL: f64 = 1e-10;
const MASS_SOLVE_MAX_ITER: usize = 2000;

#[derive(Debug, Clone)]
pub struct NormOperator {
    /// Scalar velocity mass matrix, applied to each of the three components.
    pub mv: SparseMatrix,
    pub mq: SparseMatrix,
    /// h⁻²
    pub h_scale: f64,
    /// Replace both mass matrices by their row-sum diagonals.
    pub lumped: bool,
    mv_inv_diag: Vec<f64>,
    mq_inv_diag: Vec<f64>,
    mv_lumped: Vec<f64>,
    mq_lumped: Vec<f64>,
    /// M_q·1, used for the pressure mean.
    mq_ones: Vec<f64>,
    total_mass: f64,
}

impl NormOperator {
    pub fn new(mv: SparseMatrix, mq: SparseMatrix, h: f64) -> Self {
        let inv = |m: &SparseMatrix| m.diagonal().iter().map(|d| 1.0 / d).collect::<Vec<_>>();
        let mq_ones = mq.row_sums();
        let total_mass = mq_ones.iter().sum();
        Self {
            mv_inv_diag: inv(&mv),
            mq_inv_diag: inv(&mq),
            mv_lumped: mv.row_sums(),
            mq_lumped: mq_ones.clone(),
            mv,
            mq,
            h_scale: 1.0 / (h * h),
            lumped: false,
            mq_ones,
            total_mass,
        }
    }

    pub fn with_lumping(mut self, lumped: bool) -> Self {
        self.lumped = lumped;
        self
    }

    pub fn n_velocity_dofs(&self) -> usize {
        3 * self.mv.n_rows()
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.mq.n_rows()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_velocity_dofs() + self.n_pressure_dofs()
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.n_velocity_dofs())
    }

    /// y = L x
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.mv.n_rows();
        let nu = self.n_velocity_dofs();
        for d in 0..3 {
            let r = d * n..(d + 1) * n;
            if self.lumped {
                for i in r {
                    y[i] = self.h_scale * self.mv_lumped[i - d * n] * x[i];
                }
            } else {
                self.mv.mul_into(&x[r.clone()], &mut y[r.clone()]);
                y[r].iter_mut().for_each(|v| *v *= self.h_scale);
            }
        }
        if self.lumped {
            for (i, yi) in y[nu..].iter_mut().enumerate() {
                *yi = self.mq_lumped[i] * x[nu + i];
            }
        } else {
            self.mq.mul_into(&x[nu..], &mut y[nu..]);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("norm_apply", self.n_dofs(), x.len())?;
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// ‖x‖_L
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(x, &self.apply(x)?).max(0.0).sqrt())
    }

    /// ‖(u, p)‖_L with the blocks passed separately.
    pub fn value_split(&self, u: &[f64], p: &[f64]) -> Result<f64> {
        let x: Vec<f64> = u.iter().chain(p).copied().collect();
        self.value(&x)
    }

    /// y = L⁻¹ r, with consistent mass solves to MASS_SOLVE_TOL.
    pub fn inverse_apply_into(&self, r: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.mv.n_rows();
        let nu = self.n_velocity_dofs();
        for d in 0..3 {
            let rng = d * n..(d + 1) * n;
            if self.lumped {
                for i in rng {
                    y[i] = r[i] / (self.h_scale * self.mv_lumped[i - d * n]);
                }
            } else {
                let yy = &mut y[rng.clone()];
                yy.fill(0.0);
                mass_solve(&self.mv, &self.mv_inv_diag, &r[rng], yy)?;
                yy.iter_mut().for_each(|v| *v /= self.h_scale);
            }
        }
        if self.lumped {
            for i in 0..self.n_pressure_dofs() {
                y[nu + i] = r[nu + i] / self.mq_lumped[i];
            }
        } else {
            let yy = &mut y[nu..];
            yy.fill(0.0);
            mass_solve(&self.mq, &self.mq_inv_diag, &r[nu..], yy)?;
        }
        Ok(())
    }

    pub fn inverse_apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("norm inverse", self.n_dofs(), r.len())?;
        let mut y = vec![0.0; r.len()];
        self.inverse_apply_into(r, &mut y)?;
        Ok(y)
    }

    /// ‖r‖_{L⁻¹} = (rᵀ L⁻¹ r)^(1/2)
    pub fn dual_value(&self, r: &[f64]) -> Result<f64> {
        let y = self.inverse_apply(r)?;
        Ok(dot(r, &y).max(0.0).sqrt())
    }

    pub fn dual_value_split(&self, ru: &[f64], rp: &[f64]) -> Result<f64> {
        let x: Vec<f64> = ru.iter().chain(rp).copied().collect();
        self.dual_value(&x)
    }

    /// The M_q-weighted mean 1ᵀM_q p / 1ᵀM_q 1.
    pub fn pressure_mean(&self, p: &[f64]) -> f64 {
        dot(&self.mq_ones, p) / self.total_mass
    }

    /// p ← p − mean(p)·1
    pub fn project_mean(&self, p: &mut [f64]) {
        let m = self.pressure_mean(p);
        p.iter_mut().for_each(|v| *v -= m);
    }

    /// M_q·1
    pub fn mq_ones(&self) -> &[f64] {
        &self.mq_ones
    }

    /// Splits a stacked vector into its velocity and pressure parts.
    pub fn blocks<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        self.split(x)
    }
}

fn mass_solve(m: &SparseMatrix, inv_diag: &[f64], b: &[f64], x: &mut [f64]) -> Result<()> {
    let (iterations, residual, converged) =
        cg_solve_into(|v, out| m.mul_into(v, out), inv_diag, b, x, MASS_SOLVE_TOL, MASS_SOLVE_MAX_ITER);
    if !converged {
        return Err(Error::CgNotConverged { iterations, residual });
    }
    Ok(())
}
