//! Conjugate gradients and the power method.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{symmetric_eigen, DenseMatrix};
use crate::error::{check_len, Error, Result};
use crate::sparse::SparseMatrix;
use crate::vector::{axpy, dot, norm2};

#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final ‖M x − b‖₂ / ‖b‖₂ (recursive estimate).
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned CG for SPD `m`. Stops once ‖Mx − b‖₂ ≤ tol·‖b‖₂.
pub fn cg_solve(m: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<CgResult> {
    check_len("cg_solve rhs", m.n_rows(), b.len())?;
    let inv_diag: Vec<f64> = m.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; b.len()];
    let stats = cg_solve_into(|v, out| m.mul_into(v, out), &inv_diag, b, &mut x, tol, max_iter);
    Ok(CgResult {
        x,
        iterations: stats.0,
        relative_residual: stats.1,
        converged: stats.2,
    })
}

/// Matrix-free preconditioned CG from the initial guess in `x`. Returns
/// (iterations, relative residual, converged).
pub fn cg_solve_into(
    apply: impl Fn(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> (usize, f64, bool) {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return (0, 0.0, true);
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = norm2(&r) / bnorm;
    if rel <= tol {
        return (0, rel, true);
    }
    for it in 1..=max_iter {
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            return (it, rel, false);
        }
        let alpha = rz / pq;
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        rel = norm2(&r) / bnorm;
        if rel <= tol {
            return (it, rel, true);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (max_iter, rel, false)
}

#[derive(Debug, Clone)]
pub struct PowerResult {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Rayleigh quotient after every iteration.
    pub history: Vec<f64>,
}

/// Dominant eigenvalue of `apply` by power iteration in the Euclidean inner
/// product. Stops when the eigen-residual ‖Kx − θx‖ is at most `tol`
/// relative to the Rayleigh quotient θ.
pub fn power_method(
    apply: impl FnMut(&[f64], &mut [f64]),
    dim: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<PowerResult> {
    power_method_with_inner(apply, dot, dim, tol, max_iter, seed)
}

/// Power iteration for an operator self-adjoint in the inner product
/// `inner`; Rayleigh quotients and normalisation both use it.
pub fn power_method_with_inner(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    inner: impl Fn(&[f64], &[f64]) -> f64,
    dim: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<PowerResult> {
    let mut x = start_vector(dim, seed, &inner)?;
    let mut y = vec![0.0; dim];
    let mut history = Vec::new();
    let mut lambda = f64::NAN;
    let mut resid = vec![0.0; dim];
    for it in 1..=max_iter {
        apply(&x, &mut y);
        let rq = inner(&x, &y);
        history.push(rq);
        // ‖y − θx‖ bounds the eigenvalue error of a self-adjoint operator.
        for ((r, yi), xi) in resid.iter_mut().zip(&y).zip(&x) {
            *r = yi - rq * xi;
        }
        let done = inner(&resid, &resid).max(0.0).sqrt() <= tol * rq.abs();
        lambda = rq;
        let ny = inner(&y, &y).max(0.0).sqrt();
        if ny == 0.0 {
            return Ok(PowerResult {
                value: 0.0,
                iterations: it,
                converged: true,
                history,
            });
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
        if done {
            return Ok(PowerResult {
                value: lambda,
                iterations: it,
                converged: true,
                history,
            });
        }
    }
    Ok(PowerResult {
        value: lambda,
        iterations: max_iter,
        converged: false,
        history,
    })
}

/// Basis size after which [`lanczos_with_weight`] restarts from its Ritz vector.
pub const LANCZOS_BASIS: usize = 60;

/// Largest eigenvalue of an operator self-adjoint in ⟨x, y⟩_W = xᵀWy, by
/// Lanczos with full reorthogonalisation and explicit restarts.
///
/// `weight` applies W. Converged when the Ritz residual βₖ|sₖ| falls below
/// `tol` relative to the Ritz value. `history` holds the Ritz value after
/// every operator application, `iterations` counts applications.
pub fn lanczos_with_weight(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut weight: impl FnMut(&[f64], &mut [f64]),
    dim: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<PowerResult> {
    let mut x = start_vector(dim, seed, &|a: &[f64], b: &[f64]| dot(a, b))?;
    let mut wx = vec![0.0; dim];
    w_normalize(&mut x, &mut weight, &mut wx)?;
    let mut history = Vec::new();
    let mut theta = f64::NAN;
    let mut w = vec![0.0; dim];
    let mut ww = vec![0.0; dim];
    while history.len() < max_iter {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut wbasis: Vec<Vec<f64>> = Vec::new();
        weight(&x, &mut wx);
        basis.push(x.clone());
        wbasis.push(wx.clone());
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            alpha.push(dot(&wbasis[j], &w));
            for _ in 0..2 {
                for (v, wv) in basis.iter().zip(&wbasis) {
                    let c = dot(wv, &w);
                    axpy(-c, v, &mut w);
                }
            }
            weight(&w, &mut ww);
            let b = dot(&w, &ww).max(0.0).sqrt();
            let (vals, vecs) = ritz(&alpha, &beta);
            let k = vals.len() - 1;
            theta = vals[k];
            history.push(theta);
            let residual = b * vecs[(k, k)].abs();
            if residual <= tol * theta.abs() || b <= f64::EPSILON * theta.abs() {
                return Ok(PowerResult {
                    value: theta,
                    iterations: history.len(),
                    converged: true,
                    history,
                });
            }
            if history.len() >= max_iter || basis.len() == LANCZOS_BASIS {
                // Restart from the current Ritz vector.
                x.fill(0.0);
                for (i, v) in basis.iter().enumerate() {
                    axpy(vecs[(i, k)], v, &mut x);
                }
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
            wbasis.push(ww.iter().map(|v| v / b).collect());
        }
        w_normalize(&mut x, &mut weight, &mut wx)?;
    }
    Ok(PowerResult {
        value: theta,
        iterations: history.len(),
        converged: false,
        history,
    })
}

/// Eigen-decomposition of the Lanczos tridiagonal matrix.
fn ritz(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DenseMatrix) {
    let k = alpha.len();
    let t = DenseMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    symmetric_eigen(&t)
}

fn w_normalize(x: &mut [f64], weight: &mut impl FnMut(&[f64], &mut [f64]), wx: &mut [f64]) -> Result<()> {
    weight(x, wx);
    let n = dot(x, wx).max(0.0).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::ZeroStartVector);
    }
    x.iter_mut().for_each(|v| *v /= n);
    Ok(())
}

fn start_vector(dim: usize, seed: u64, inner: &impl Fn(&[f64], &[f64]) -> f64) -> Result<Vec<f64>> {
    for attempt in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = inner(&x, &x).max(0.0).sqrt();
        if n > 0.0 && n.is_finite() {
            for v in &mut x {
                *v /= n;
            }
            return Ok(x);
        }
    }
    Err(Error::ZeroStartVector)
}
