//! Uzawa-type block smoothers.
//!
//! Every smoother is a stationary method x ← x + P⁻¹(b − 𝒜x) for the saddle
//! operator 𝒜 = [[A, Bᵀ], [B, −C]], with P built from an approximation Â of
//! A and Ŝ of the Schur complement C + BA⁻¹Bᵀ:
//!
//! * diagonal       P_d = diag(Â, −Ŝ)
//! * lower          P_ℓ = [[Â, 0], [B, −Ŝ]]
//! * upper          P_u = P_ℓᵀ
//! * factorization  P_f = [[I, 0], [BÂ⁻¹, I]] diag(Â, −Ŝ) [[I, Â⁻¹Bᵀ], [0, I]]
//! * symmetric      P_s, as P_f but with Â_s = Â(Â + Âᵀ − A)⁻¹Âᵀ in the
//!   middle and Â⁻ᵀ in the right factor
//! * Braess–Sarazin P_f with Â = α·diag A and Ŝ = C + B(α·diag A)⁻¹Bᵀ
//!   solved by an inner CG
//!
//! Steps are written in residual form, so an update never needs more than
//! the blocks themselves and the inverses of Â and Ŝ.

use serde::{Deserialize, Serialize};

use crate::assembly::SaddlePointSystem;
use crate::dense::{DenseMatrix, LuFactorization};
use crate::error::{check_len, Error, Result};
use crate::hierarchy::Hierarchy;
use crate::iterative::{cg_solve_into, power_method};
use crate::sparse::{SparseMatrix, TriangularPart};
use crate::vector::{dot, norm2};

/// Damping of the Gauss–Seidel Schur approximation on C.
pub const OMEGA_GS_C: f64 = 0.3;
/// Damping of the symmetric Gauss–Seidel Schur approximation on C.
pub const OMEGA_SYMGS_C: f64 = 0.23;
/// Guard substituted for vanishing diagonal entries of C.
pub const C_DIAGONAL_GUARD: f64 = 1e-14;
/// Inner CG settings of the Braess–Sarazin smoother.
pub const BRAESS_SARAZIN_TOL: f64 = 1e-10;
pub const BRAESS_SARAZIN_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherClass {
    Diagonal,
    Lower,
    Upper,
    Factorization,
    Symmetric,
    BraessSarazin,
}

/// Velocity block approximation Â. With A = L + Lᵀ − D (L lower triangle
/// including the diagonal D): forward GS is Â = L, backward GS is Â = Lᵀ,
/// symmetric GS is Â_s = L D⁻¹ Lᵀ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AHatKind {
    Jacobi,
    ForwardGs,
    BackwardGs,
    SymmetricGs,
}

/// Schur complement approximation Ŝ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SHatKind {
    /// Ŝ = ω⁻¹ diag(M_q)
    DampedJacobiMass,
    /// Ŝ = ω⁻¹ (lower triangle of C)
    DampedGsC,
    /// Ŝ = ω⁻¹ (symmetric Gauss–Seidel matrix of C)
    DampedSymgsC,
}

impl AHatKind {
    pub fn is_symmetric(self) -> bool {
        matches!(self, AHatKind::Jacobi | AHatKind::SymmetricGs)
    }
}

impl SHatKind {
    /// Damping used when none is given explicitly. The mass-based choice has
    /// no fixed default; it comes from `compute_omega`.
    pub fn default_omega(self) -> Option<f64> {
        match self {
            SHatKind::DampedJacobiMass => None,
            SHatKind::DampedGsC => Some(OMEGA_GS_C),
            SHatKind::DampedSymgsC => Some(OMEGA_SYMGS_C),
        }
    }

    /// The nonsymmetric Gauss–Seidel Schur approximation is outside the
    /// symmetric-Ŝ convergence theory.
    pub fn is_experimental(self) -> bool {
        matches!(self, SHatKind::DampedGsC)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherSpec {
    pub class: SmootherClass,
    pub a_hat: AHatKind,
    pub s_hat: SHatKind,
    pub omega: f64,
    /// Scaling of diag A (Braess–Sarazin only).
    pub alpha: f64,
}

impl SmootherSpec {
    pub fn new(class: SmootherClass, a_hat: AHatKind, s_hat: SHatKind, omega: f64) -> Self {
        Self {
            class,
            a_hat,
            s_hat,
            omega,
            alpha: 1.0,
        }
    }

    /// Default Â of a class: backward GS for the symmetric class, symmetric
    /// GS otherwise.
    pub fn default_a_hat(class: SmootherClass) -> AHatKind {
        match class {
            SmootherClass::Symmetric => AHatKind::BackwardGs,
            _ => AHatKind::SymmetricGs,
        }
    }

    pub fn lower(omega: f64) -> Self {
        Self::new(SmootherClass::Lower, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass, omega)
    }

    pub fn symmetric(omega: f64) -> Self {
        Self::new(SmootherClass::Symmetric, AHatKind::BackwardGs, SHatKind::DampedJacobiMass, omega)
    }

    pub fn braess_sarazin(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::new(SmootherClass::BraessSarazin, AHatKind::Jacobi, SHatKind::DampedJacobiMass, 1.0)
        }
    }

    pub fn with_s_hat(self, s_hat: SHatKind, omega: f64) -> Self {
        Self { s_hat, omega, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        use SmootherClass::*;
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidSpec(format!("omega must be positive, got {}", self.omega)));
        }
        match self.class {
            Diagonal | Lower | Upper | Factorization if !self.a_hat.is_symmetric() => Err(Error::InvalidSpec(format!(
                "class {:?} needs a symmetric velocity approximation, got {:?}",
                self.class, self.a_hat
            ))),
            BraessSarazin if !(self.alpha > 0.0 && self.alpha.is_finite()) => {
                Err(Error::InvalidSpec(format!("alpha must be positive, got {}", self.alpha)))
            }
            _ => Ok(()),
        }
    }

    /// Short name such as `Pl(As,S)`.
    pub fn label(&self) -> String {
        let class = match self.class {
            SmootherClass::Diagonal => "Pd",
            SmootherClass::Lower => "Pl",
            SmootherClass::Upper => "Pu",
            SmootherClass::Factorization => "Pf",
            SmootherClass::Symmetric => "Ps",
            SmootherClass::BraessSarazin => return format!("BS(alpha={})", self.alpha),
        };
        let a = match self.a_hat {
            AHatKind::Jacobi => "D",
            AHatKind::ForwardGs => "L",
            AHatKind::BackwardGs => "A",
            AHatKind::SymmetricGs => "As",
        };
        let s = match self.s_hat {
            SHatKind::DampedJacobiMass => "S",
            SHatKind::DampedGsC => "St",
            SHatKind::DampedSymgsC => "Sts",
        };
        format!("{class}({a},{s})")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sweep {
    Forward,
    Backward,
    Symmetric,
}

/// Applies the inverse of one block approximation.
#[derive(Debug, Clone)]
enum BlockInverse<'a> {
    /// out = scale ∘ r
    Diagonal(Vec<f64>),
    /// scale · (sweep of `matrix` with diagonal `diag`)
    Sweep {
        matrix: &'a SparseMatrix,
        diag: Vec<f64>,
        sweep: Sweep,
        scale: f64,
    },
    /// Explicit inverse and its transpose.
    Dense { inv: DenseMatrix, inv_t: DenseMatrix },
    /// Inner CG on C + B D⁻¹ Bᵀ.
    Schur(SchurSolver<'a>),
}

impl BlockInverse<'_> {
    fn apply(&self, r: &[f64], out: &mut [f64], transpose: bool) {
        match self {
            BlockInverse::Diagonal(d) => {
                for ((o, ri), di) in out.iter_mut().zip(r).zip(d) {
                    *o = ri * di;
                }
            }
            BlockInverse::Sweep {
                matrix,
                diag,
                sweep,
                scale,
            } => {
                out.copy_from_slice(r);
                let part = |forward: bool| {
                    if forward != transpose {
                        TriangularPart::Lower
                    } else {
                        TriangularPart::Upper
                    }
                };
                match sweep {
                    Sweep::Forward => matrix.triangular_solve_in_place(out, part(true), diag),
                    Sweep::Backward => matrix.triangular_solve_in_place(out, part(false), diag),
                    Sweep::Symmetric => {
                        matrix.triangular_solve_in_place(out, TriangularPart::Lower, diag);
                        for (o, d) in out.iter_mut().zip(diag) {
                            *o *= d;
                        }
                        matrix.triangular_solve_in_place(out, TriangularPart::Upper, diag);
                    }
                }
                if *scale != 1.0 {
                    out.iter_mut().for_each(|v| *v *= scale);
                }
            }
            BlockInverse::Dense { inv, inv_t } => {
                let m = if transpose { inv_t } else { inv };
                out.copy_from_slice(&m.matvec(r));
            }
            BlockInverse::Schur(s) => s.solve(r, out),
        }
    }
}

/// Matrix-free CG on C + B D⁻¹ Bᵀ for the Braess–Sarazin pressure step.
#[derive(Debug, Clone)]
struct SchurSolver<'a> {
    system: &'a SaddlePointSystem,
    d_inv: Vec<f64>,
    precond: Vec<f64>,
    /// Constants lie in the kernel; project them out of rhs and solution.
    singular: bool,
}

impl<'a> SchurSolver<'a> {
    fn new(system: &'a SaddlePointSystem, d_inv: Vec<f64>) -> Self {
        let m = system.n_pressure_dofs();
        let c_diag = system.c.diagonal();
        let mut precond = vec![0.0; m];
        for (i, pc) in precond.iter_mut().enumerate() {
            let (cols, vals) = system.b.row(i);
            let bdb: f64 = cols.iter().zip(vals).map(|(&j, &b)| b * b * d_inv[j]).sum();
            let d = c_diag[i] + bdb;
            *pc = if d > 0.0 { 1.0 / d } else { 1.0 };
        }
        let mut s = Self {
            system,
            d_inv,
            precond,
            singular: false,
        };
        let ones = vec![1.0; m];
        let mut y = vec![0.0; m];
        s.apply(&ones, &mut y);
        let scale = s.precond.iter().map(|p| 1.0 / p).fold(0.0_f64, f64::max);
        s.singular = m > 0 && norm2(&y) <= 1e-12 * scale * (m as f64).sqrt();
        s
    }

    fn apply(&self, q: &[f64], out: &mut [f64]) {
        let mut t = vec![0.0; self.system.n_velocity_dofs()];
        self.system.b_t.mul_into(q, &mut t);
        for (ti, di) in t.iter_mut().zip(&self.d_inv) {
            *ti *= di;
        }
        self.system.b.mul_into(&t, out);
        self.system.c.mul_add(1.0, q, out);
    }

    fn solve(&self, r: &[f64], out: &mut [f64]) {
        let mut rhs = r.to_vec();
        if self.singular {
            remove_mean(&mut rhs);
        }
        out.fill(0.0);
        cg_solve_into(
            |v, o| self.apply(v, o),
            &self.precond,
            &rhs,
            out,
            BRAESS_SARAZIN_TOL,
            BRAESS_SARAZIN_MAX_ITER,
        );
        if self.singular {
            remove_mean(out);
        }
    }
}

fn remove_mean(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// A class together with transposition flags for Â and Ŝ. The transpose of
/// a preconditioner is again one of the classes with some blocks transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Mode {
    class: SmootherClass,
    ta: bool,
    ts: bool,
}

impl Mode {
    fn of(class: SmootherClass) -> Self {
        Self {
            class,
            ta: false,
            ts: false,
        }
    }

    /// Mode of Pᵀ.
    fn transposed(self) -> Self {
        use SmootherClass::*;
        let Mode { class, ta, ts } = self;
        match class {
            Diagonal | Factorization => Mode { class, ta: !ta, ts: !ts },
            Lower => Mode { class: Upper, ta, ts },
            Upper => Mode { class: Lower, ta, ts },
            Symmetric => Mode { class, ta, ts: !ts },
            BraessSarazin => self,
        }
    }
}

#[derive(Debug, Clone)]
struct Scratch {
    ru: Vec<f64>,
    rp: Vec<f64>,
    du: Vec<f64>,
    dp: Vec<f64>,
    tu: Vec<f64>,
}

/// A runnable smoother over one saddle-point system.
#[derive(Debug, Clone)]
pub struct Smoother<'a> {
    spec: SmootherSpec,
    system: &'a SaddlePointSystem,
    a_inv: BlockInverse<'a>,
    s_inv: BlockInverse<'a>,
    mode: Mode,
    scratch: Scratch,
}

impl<'a> Smoother<'a> {
    /// `mq_diag` is the diagonal of the pressure mass matrix, needed by the
    /// mass-based Schur approximation.
    pub fn new(spec: SmootherSpec, system: &'a SaddlePointSystem, mq_diag: &[f64]) -> Result<Self> {
        spec.validate()?;
        check_len("mass diagonal", system.n_pressure_dofs(), mq_diag.len())?;
        let a_diag = system.a.diagonal();
        if let Some(row) = a_diag.iter().position(|&d| d == 0.0) {
            return Err(Error::ZeroDiagonal { row });
        }
        let (a_inv, s_inv) = if spec.class == SmootherClass::BraessSarazin {
            let d_inv: Vec<f64> = a_diag.iter().map(|d| 1.0 / (spec.alpha * d)).collect();
            (BlockInverse::Diagonal(d_inv.clone()), BlockInverse::Schur(SchurSolver::new(system, d_inv)))
        } else {
            let a_inv = match spec.a_hat {
                AHatKind::Jacobi => BlockInverse::Diagonal(a_diag.iter().map(|d| 1.0 / d).collect()),
                kind => BlockInverse::Sweep {
                    matrix: &system.a,
                    diag: a_diag,
                    sweep: match kind {
                        AHatKind::ForwardGs => Sweep::Forward,
                        AHatKind::BackwardGs => Sweep::Backward,
                        _ => Sweep::Symmetric,
                    },
                    scale: 1.0,
                },
            };
            let s_inv = match spec.s_hat {
                SHatKind::DampedJacobiMass => {
                    if let Some(row) = mq_diag.iter().position(|&d| d <= 0.0) {
                        return Err(Error::ZeroDiagonal { row });
                    }
                    BlockInverse::Diagonal(mq_diag.iter().map(|d| spec.omega / d).collect())
                }
                kind => BlockInverse::Sweep {
                    matrix: &system.c,
                    diag: system.c.diagonal().iter().map(|&d| d.max(C_DIAGONAL_GUARD)).collect(),
                    sweep: if kind == SHatKind::DampedGsC {
                        Sweep::Forward
                    } else {
                        Sweep::Symmetric
                    },
                    scale: spec.omega,
                },
            };
            (a_inv, s_inv)
        };
        Ok(Self::assemble(spec, system, a_inv, s_inv))
    }

    /// Smoother with explicitly given dense Â and Ŝ (small systems only).
    /// `spec` contributes only its class.
    pub fn with_dense_blocks(
        class: SmootherClass,
        system: &'a SaddlePointSystem,
        a_hat: &DenseMatrix,
        s_hat: &DenseMatrix,
    ) -> Result<Self> {
        check_len("dense A-hat", system.n_velocity_dofs(), a_hat.rows())?;
        check_len("dense S-hat", system.n_pressure_dofs(), s_hat.rows())?;
        let dense = |m: &DenseMatrix| -> Result<BlockInverse<'a>> {
            let inv = if m.rows() == 0 { m.clone() } else { inverse(m)? };
            Ok(BlockInverse::Dense {
                inv_t: inv.transpose(),
                inv,
            })
        };
        let spec = SmootherSpec::new(class, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass, 1.0);
        Ok(Self::assemble(spec, system, dense(a_hat)?, dense(s_hat)?))
    }

    fn assemble(spec: SmootherSpec, system: &'a SaddlePointSystem, a_inv: BlockInverse<'a>, s_inv: BlockInverse<'a>) -> Self {
        let (n, m) = (system.n_velocity_dofs(), system.n_pressure_dofs());
        Self {
            spec,
            system,
            a_inv,
            s_inv,
            mode: Mode::of(spec.class),
            scratch: Scratch {
                ru: vec![0.0; n],
                rp: vec![0.0; m],
                du: vec![0.0; n],
                dp: vec![0.0; m],
                tu: vec![0.0; n],
            },
        }
    }

    /// The method whose preconditioner is Pᵀ (P_u for P_ℓ and so on).
    pub fn adjoint(&self) -> Self {
        let mut s = self.clone();
        s.mode = self.mode.transposed();
        s
    }

    pub fn spec(&self) -> &SmootherSpec {
        &self.spec
    }

    pub fn system(&self) -> &'a SaddlePointSystem {
        self.system
    }

    /// Â⁻¹ r, or Â⁻ᵀ r when `transposed`.
    pub fn apply_a_hat_inverse(&self, r: &[f64], transposed: bool) -> Result<Vec<f64>> {
        check_len("velocity residual", self.system.n_velocity_dofs(), r.len())?;
        let mut out = vec![0.0; r.len()];
        self.a_inv.apply(r, &mut out, transposed);
        Ok(out)
    }

    /// Ŝ⁻¹ r, or Ŝ⁻ᵀ r when `transposed`.
    pub fn apply_s_hat_inverse(&self, r: &[f64], transposed: bool) -> Result<Vec<f64>> {
        check_len("pressure residual", self.system.n_pressure_dofs(), r.len())?;
        let mut out = vec![0.0; r.len()];
        self.s_inv.apply(r, &mut out, transposed);
        Ok(out)
    }

    /// One smoothing step (u, p) ← (u, p) + P⁻¹((f, g) − 𝒜(u, p)).
    pub fn step(&mut self, u: &mut [f64], p: &mut [f64], f: &[f64], g: &[f64]) {
        use SmootherClass::*;
        let Mode { class, ta, ts } = self.mode;
        let sys = self.system;
        let Scratch { ru, rp, du, dp, tu } = &mut self.scratch;
        match class {
            Diagonal => {
                velocity_residual(sys, u, p, f, ru);
                pressure_residual(sys, u, p, g, rp);
                self.a_inv.apply(ru, du, ta);
                self.s_inv.apply(rp, dp, ts);
                add(u, du, 1.0);
                add(p, dp, -1.0);
            }
            Lower => {
                velocity_residual(sys, u, p, f, ru);
                self.a_inv.apply(ru, du, ta);
                add(u, du, 1.0);
                pressure_residual(sys, u, p, g, rp);
                self.s_inv.apply(rp, dp, ts);
                add(p, dp, -1.0);
            }
            Upper => {
                pressure_residual(sys, u, p, g, rp);
                self.s_inv.apply(rp, dp, !ts);
                add(p, dp, -1.0);
                velocity_residual(sys, u, p, f, ru);
                self.a_inv.apply(ru, du, !ta);
                add(u, du, 1.0);
            }
            Factorization | BraessSarazin => {
                // u* = u + Â⁻¹ r_u; the pressure update sees u*; the final
                // velocity update restarts from u with the new pressure.
                velocity_residual(sys, u, p, f, ru);
                self.a_inv.apply(ru, du, ta);
                for i in 0..tu.len() {
                    tu[i] = u[i] + du[i];
                }
                pressure_residual(sys, tu, p, g, rp);
                self.s_inv.apply(rp, dp, ts);
                add(p, dp, -1.0);
                // f − Au − Bᵀp_new = r_u + Bᵀ dp
                sys.b_t.mul_add(1.0, dp, ru);
                self.a_inv.apply(ru, du, ta);
                add(u, du, 1.0);
            }
            Symmetric => {
                velocity_residual(sys, u, p, f, ru);
                self.a_inv.apply(ru, du, ta);
                add(u, du, 1.0);
                pressure_residual(sys, u, p, g, rp);
                self.s_inv.apply(rp, dp, ts);
                add(p, dp, -1.0);
                velocity_residual(sys, u, p, f, ru);
                self.a_inv.apply(ru, du, !ta);
                add(u, du, 1.0);
            }
        }
    }

    /// P⁻¹ r (or P⁻ᵀ r), computed from the block formulas rather than from a
    /// smoothing step.
    pub fn apply_preconditioner_inverse(&self, ru: &[f64], rp: &[f64], transposed: bool) -> Result<(Vec<f64>, Vec<f64>)> {
        use SmootherClass::*;
        let sys = self.system;
        check_len("velocity residual", sys.n_velocity_dofs(), ru.len())?;
        check_len("pressure residual", sys.n_pressure_dofs(), rp.len())?;
        let mode = if transposed { self.mode.transposed() } else { self.mode };
        let Mode { class, ta, ts } = mode;
        let (n, m) = (sys.n_velocity_dofs(), sys.n_pressure_dofs());
        let mut du = vec![0.0; n];
        let mut dp = vec![0.0; m];
        let mut tu = vec![0.0; n];
        let mut tp = vec![0.0; m];
        match class {
            Diagonal => {
                self.a_inv.apply(ru, &mut du, ta);
                self.s_inv.apply(rp, &mut dp, ts);
                dp.iter_mut().for_each(|v| *v = -*v);
            }
            Lower => {
                self.a_inv.apply(ru, &mut du, ta);
                sys.b.mul_into(&du, &mut tp);
                sub_assign(&mut tp, rp);
                self.s_inv.apply(&tp, &mut dp, ts);
            }
            Upper => {
                self.s_inv.apply(rp, &mut dp, !ts);
                dp.iter_mut().for_each(|v| *v = -*v);
                tu.copy_from_slice(ru);
                sys.b_t.mul_add(-1.0, &dp, &mut tu);
                self.a_inv.apply(&tu, &mut du, !ta);
            }
            Factorization | BraessSarazin | Symmetric => {
                // x = Â⁻¹ r_u, δp = −Ŝ⁻¹(r_p − Bx)
                let mut x = vec![0.0; n];
                self.a_inv.apply(ru, &mut x, ta);
                sys.b.mul_into(&x, &mut tp);
                for (t, r) in tp.iter_mut().zip(rp) {
                    *t = r - *t;
                }
                self.s_inv.apply(&tp, &mut dp, ts);
                dp.iter_mut().for_each(|v| *v = -*v);
                tu.copy_from_slice(ru);
                sys.b_t.mul_add(-1.0, &dp, &mut tu);
                if class == Symmetric {
                    // δu = x + Â⁻ᵀ(r_u − Ax − Bᵀδp)
                    sys.a.mul_add(-1.0, &x, &mut tu);
                    self.a_inv.apply(&tu, &mut du, !ta);
                    add(&mut du, &x, 1.0);
                } else {
                    self.a_inv.apply(&tu, &mut du, ta);
                }
            }
        }
        Ok((du, dp))
    }

    /// e ← M e with M = I − P⁻¹𝒜: one step with zero right-hand side.
    pub fn iteration_operator_apply(&mut self, eu: &mut [f64], ep: &mut [f64]) {
        let zero_u = vec![0.0; eu.len()];
        let zero_p = vec![0.0; ep.len()];
        self.step(eu, ep, &zero_u, &zero_p);
    }

    /// y ← Mᵀ y = y − 𝒜 P⁻ᵀ y (𝒜 is symmetric).
    pub fn iteration_operator_transpose_apply(&mut self, yu: &mut [f64], yp: &mut [f64]) -> Result<()> {
        let (zu, zp) = self.apply_preconditioner_inverse(yu, yp, true)?;
        let sys = self.system;
        sys.a.mul_add(-1.0, &zu, yu);
        sys.b_t.mul_add(-1.0, &zp, yu);
        sys.b.mul_add(-1.0, &zu, yp);
        sys.c.mul_add(1.0, &zp, yp);
        Ok(())
    }
}

fn inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    LuFactorization::new(m)?;
    m.inverse()
}

/// r = f − Au − Bᵀp
fn velocity_residual(sys: &SaddlePointSystem, u: &[f64], p: &[f64], f: &[f64], r: &mut [f64]) {
    sys.a.mul_into(u, r);
    sys.b_t.mul_add(1.0, p, r);
    for (ri, fi) in r.iter_mut().zip(f) {
        *ri = fi - *ri;
    }
}

/// r = g − Bu + Cp
fn pressure_residual(sys: &SaddlePointSystem, u: &[f64], p: &[f64], g: &[f64], r: &mut [f64]) {
    sys.b.mul_into(u, r);
    sys.c.mul_add(-1.0, p, r);
    for (ri, gi) in r.iter_mut().zip(g) {
        *ri = gi - *ri;
    }
}

fn add(x: &mut [f64], d: &[f64], a: f64) {
    for (xi, di) in x.iter_mut().zip(d) {
        *xi += a * di;
    }
}

fn sub_assign(x: &mut [f64], y: &[f64]) {
    for (xi, yi) in x.iter_mut().zip(y) {
        *xi -= yi;
    }
}

/// Result of the damping-parameter estimate.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaEstimate {
    pub omega: f64,
    pub lambda_max: f64,
    pub iterations: usize,
    pub converged: bool,
    /// λ estimates after every power iteration.
    pub history: Vec<f64>,
}

/// Upper cap on ω, used when the Schur operator vanishes.
pub const OMEGA_MAX: f64 = 1.0;
pub const OMEGA_TOL: f64 = 1e-6;
pub const OMEGA_MAX_ITER: usize = 200;

/// ω = 1/λ_max of (diag M_q)⁻¹(C + B Â_s⁻¹ Bᵀ) on one hierarchy level, with
/// Â_s the symmetric Gauss–Seidel matrix of A. Constant pressures are
/// deflated.
pub fn compute_omega(hierarchy: &Hierarchy, level: usize, tol: f64, seed: u64) -> Result<OmegaEstimate> {
    let lv = hierarchy.level(level);
    compute_omega_for(&lv.system, &lv.norm.mq.diagonal(), true, tol, OMEGA_MAX_ITER, seed)
}

/// As `compute_omega` for an arbitrary system. `deflate_constants` should
/// be set when constant pressures lie in the kernel of B ᵀ and C.
pub fn compute_omega_for(
    system: &SaddlePointSystem,
    mq_diag: &[f64],
    deflate_constants: bool,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<OmegaEstimate> {
    let m = system.n_pressure_dofs();
    check_len("mass diagonal", m, mq_diag.len())?;
    let a_diag = system.a.diagonal();
    if let Some(row) = a_diag.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal { row });
    }
    let a_s = BlockInverse::Sweep {
        matrix: &system.a,
        diag: a_diag,
        sweep: Sweep::Symmetric,
        scale: 1.0,
    };
    let sqrt_d: Vec<f64> = mq_diag.iter().map(|d| d.sqrt()).collect();
    let kernel: Vec<f64> = {
        let k = sqrt_d.clone();
        let n = norm2(&k);
        k.into_iter().map(|v| v / n).collect()
    };
    let deflate = |y: &mut [f64]| {
        if deflate_constants {
            let c = dot(y, &kernel);
            y.iter_mut().zip(&kernel).for_each(|(v, k)| *v -= c * k);
        }
    };
    let n = system.n_velocity_dofs();
    let mut q = vec![0.0; m];
    let mut t = vec![0.0; n];
    let mut s = vec![0.0; n];
    // y = D^{-1/2} (C + B Â_s⁻¹ Bᵀ) D^{-1/2} x, restricted to the complement
    // of the kernel direction D^{1/2}·1.
    let apply = |x: &[f64], y: &mut [f64]| {
        q.copy_from_slice(x);
        deflate(&mut q);
        for i in 0..m {
            q[i] /= sqrt_d[i];
        }
        system.b_t.mul_into(&q, &mut t);
        a_s.apply(&t, &mut s, false);
        system.b.mul_into(&s, y);
        system.c.mul_add(1.0, &q, y);
        for i in 0..m {
            y[i] /= sqrt_d[i];
        }
        deflate(y);
    };
    let r = power_method(apply, m, tol, max_iter, seed)?;
    let lambda = r.value.max(0.0);
    let omega = if lambda > 0.0 { (1.0 / lambda).min(OMEGA_MAX) } else { OMEGA_MAX };
    Ok(OmegaEstimate {
        omega,
        lambda_max: lambda,
        iterations: r.iterations,
        converged: r.converged,
        history: r.history,
    })
}

/// Numerical certificates of the smoother hypotheses.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// λ_max(Â⁻¹A) for symmetric Â; Â ≥ A holds when it is ≤ 1.
    pub a_hat_lambda_max: Option<f64>,
    pub a_hat_dominates: Option<bool>,
    /// Â + Âᵀ > A. Automatic for triangular Â (the excess is diag A); for
    /// symmetric Â this needs λ_max(Â⁻¹A) < 2.
    pub sum_condition: bool,
    /// λ_max(Ŝ⁻¹(C + B Â_s⁻¹ Bᵀ)); the Schur condition asks for ≤ 1.
    pub schur_lambda_max: f64,
    pub schur_margin: f64,
    pub schur_holds: bool,
    /// The Schur approximation is outside the symmetric theory.
    pub experimental: bool,
}

const CONDITION_TOL: f64 = 1e-8;

/// Estimates the hypotheses by power iteration. Only meaningful for
/// smoothers built by `Smoother::new`.
pub fn validate_conditions(s: &Smoother, seed: u64) -> Result<ConditionReport> {
    let sys = s.system;
    let n = sys.n_velocity_dofs();
    let m = sys.n_pressure_dofs();
    let a_sym = s.spec.class == SmootherClass::BraessSarazin || s.spec.a_hat.is_symmetric();
    let (a_hat_lambda_max, a_hat_dominates, sum_condition) = if a_sym {
        let mut t = vec![0.0; n];
        let r = power_method(
            |x, y| {
                sys.a.mul_into(x, &mut t);
                s.a_inv.apply(&t, y, false);
            },
            n,
            1e-10,
            2000,
            seed,
        )?;
        (Some(r.value), Some(r.value <= 1.0 + CONDITION_TOL), r.value < 2.0)
    } else {
        (None, None, sys.a.diagonal().iter().all(|&d| d > 0.0))
    };

    let a_diag = sys.a.diagonal();
    let a_s = BlockInverse::Sweep {
        matrix: &sys.a,
        diag: a_diag,
        sweep: Sweep::Symmetric,
        scale: 1.0,
    };
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; m];
    let r = power_method(
        |x, y| {
            sys.b_t.mul_into(x, &mut t);
            a_s.apply(&t, &mut w, false);
            sys.b.mul_into(&w, &mut z);
            sys.c.mul_add(1.0, x, &mut z);
            s.s_inv.apply(&z, y, false);
        },
        m,
        1e-10,
        2000,
        seed.wrapping_add(1),
    )?;
    let schur_lambda_max = r.value;
    Ok(ConditionReport {
        a_hat_lambda_max,
        a_hat_dominates,
        sum_condition,
        schur_lambda_max,
        schur_margin: 1.0 - schur_lambda_max,
        schur_holds: schur_lambda_max <= 1.0 + 1e-6,
        experimental: s.spec.s_hat.is_experimental() && s.spec.class != SmootherClass::BraessSarazin,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dense::{lu_solve, max_eigenvalue_symmetric, symmetric_function};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_vec(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
        DenseMatrix::random(n, 1, r).column(0)
    }

    fn max_diff(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Random n+m saddle system with SPD A and C.
    fn dense_system(n: usize, m: usize, seed: u64) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
        let mut r = rng(seed);
        let a = DenseMatrix::random_spd(n, 1.0, &mut r);
        let b = DenseMatrix::random(m, n, &mut r);
        let c = DenseMatrix::random_spd(m, 0.5, &mut r).scale(0.1);
        (a, b, c)
    }

    /// L D⁻¹ Lᵀ with L the lower triangle of `a` including the diagonal.
    fn dense_symgs(a: &DenseMatrix) -> DenseMatrix {
        let l = a.lower();
        let mid = l.add(&l.transpose()).sub(a);
        l.matmul(&mid.inverse().unwrap()).matmul(&l.transpose())
    }

    fn saddle(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_blocks(a, &b.transpose(), b, &c.scale(-1.0))
    }

    fn zeros(r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::zeros(r, c)
    }

    /// Dense I − P⁻¹𝒜.
    fn dense_iteration(p: &DenseMatrix, k: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::identity(k.rows()).sub(&p.inverse().unwrap().matmul(k))
    }

    /// Applies the smoother iteration operator to every unit vector.
    fn smoother_matrix(s: &mut Smoother, n: usize, m: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(n + m, n + m);
        for j in 0..n + m {
            let mut e = vec![0.0; n + m];
            e[j] = 1.0;
            let (eu, ep) = e.split_at_mut(n);
            s.iteration_operator_apply(eu, ep);
            out.set_column(j, &e);
        }
        out
    }

    #[test]
    fn diagonal_a_makes_all_kinds_jacobi() {
        let d = [2.0, 3.0, 5.0, 7.0];
        let sys = SaddlePointSystem::from_dense(
            &DenseMatrix::from_diagonal(&d),
            &DenseMatrix::random(2, 4, &mut rng(1)),
            &DenseMatrix::identity(2),
        )
        .unwrap();
        let r = [1.0, -2.0, 3.0, 0.5];
        let expect: Vec<f64> = r.iter().zip(&d).map(|(r, d)| r / d).collect();
        for kind in [AHatKind::Jacobi, AHatKind::ForwardGs, AHatKind::BackwardGs, AHatKind::SymmetricGs] {
            let spec = SmootherSpec::new(SmootherClass::Symmetric, kind, SHatKind::DampedJacobiMass, 1.0);
            let s = Smoother::new(spec, &sys, &[1.0, 1.0]).unwrap();
            for t in [false, true] {
                assert!(max_diff(&s.apply_a_hat_inverse(&r, t).unwrap(), &expect) < 1e-15, "{kind:?}");
            }
        }
    }

    #[test]
    fn symmetric_gs_matches_dense_oracle() {
        let mut r = rng(2);
        let a = DenseMatrix::random_spd(10, 0.5, &mut r);
        let sys = SaddlePointSystem::from_dense(&a, &zeros(1, 10), &DenseMatrix::identity(1)).unwrap();
        let s = Smoother::new(SmootherSpec::lower(1.0), &sys, &[1.0]).unwrap();
        let inv = dense_symgs(&a).inverse().unwrap();
        let x = random_vec(10, &mut r);
        let y = random_vec(10, &mut r);
        assert!(max_diff(&s.apply_a_hat_inverse(&x, false).unwrap(), &inv.matvec(&x)) < 1e-11);
        // Â_s is symmetric.
        let sx = s.apply_a_hat_inverse(&x, false).unwrap();
        let sy = s.apply_a_hat_inverse(&y, false).unwrap();
        assert!((dot(&sx, &y) - dot(&x, &sy)).abs() < 1e-12 * norm2(&sx) * norm2(&y));
    }

    #[test]
    fn triangular_kinds_match_dense_triangles() {
        let mut r = rng(3);
        let a = DenseMatrix::random_spd(9, 0.5, &mut r);
        let sys = SaddlePointSystem::from_dense(&a, &zeros(1, 9), &DenseMatrix::identity(1)).unwrap();
        let x = random_vec(9, &mut r);
        for (kind, tri) in [(AHatKind::ForwardGs, a.lower()), (AHatKind::BackwardGs, a.upper())] {
            let spec = SmootherSpec::new(SmootherClass::Symmetric, kind, SHatKind::DampedJacobiMass, 1.0);
            let s = Smoother::new(spec, &sys, &[1.0]).unwrap();
            let inv = tri.inverse().unwrap();
            assert!(max_diff(&s.apply_a_hat_inverse(&x, false).unwrap(), &inv.matvec(&x)) < 1e-11);
            assert!(max_diff(&s.apply_a_hat_inverse(&x, true).unwrap(), &inv.transpose().matvec(&x)) < 1e-11);
        }
    }

    #[test]
    fn damped_jacobi_mass_on_unit_vector() {
        let omega = 0.55849;
        let (a, b, c) = dense_system(4, 3, 4);
        let sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let mq = [0.5, 0.25, 2.0];
        let s = Smoother::new(SmootherSpec::lower(omega), &sys, &mq).unwrap();
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            let y = s.apply_s_hat_inverse(&e, false).unwrap();
            for (j, v) in y.iter().enumerate() {
                let want = if i == j { omega / mq[i] } else { 0.0 };
                assert!((v - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn schur_kinds_coincide_on_diagonal_c() {
        let cd = [0.5, 2.0, 4.0];
        let (a, b, _) = dense_system(4, 3, 5);
        let sys = SaddlePointSystem::from_dense(&a, &b, &DenseMatrix::from_diagonal(&cd)).unwrap();
        let r = [1.0, 2.0, -3.0];
        let expect: Vec<f64> = r.iter().zip(&cd).map(|(r, d)| r / d).collect();
        for kind in [SHatKind::DampedJacobiMass, SHatKind::DampedGsC, SHatKind::DampedSymgsC] {
            let spec = SmootherSpec::lower(1.0).with_s_hat(kind, 1.0);
            let s = Smoother::new(spec, &sys, &cd).unwrap();
            assert!(max_diff(&s.apply_s_hat_inverse(&r, false).unwrap(), &expect) < 1e-15, "{kind:?}");
        }
    }

    #[test]
    fn damped_symgs_c_matches_dense_oracle() {
        let mut r = rng(6);
        let c = DenseMatrix::random_spd(12, 0.2, &mut r);
        let a = DenseMatrix::identity(3);
        let sys = SaddlePointSystem::from_dense(&a, &DenseMatrix::random(12, 3, &mut r), &c).unwrap();
        let omega = OMEGA_SYMGS_C;
        let spec = SmootherSpec::lower(1.0).with_s_hat(SHatKind::DampedSymgsC, omega);
        let s = Smoother::new(spec, &sys, &[1.0; 12]).unwrap();
        let s_hat = dense_symgs(&c).scale(1.0 / omega);
        let x = random_vec(12, &mut r);
        assert!(max_diff(&s.apply_s_hat_inverse(&x, false).unwrap(), &s_hat.inverse().unwrap().matvec(&x)) < 1e-11);

        let spec = SmootherSpec::lower(1.0).with_s_hat(SHatKind::DampedGsC, OMEGA_GS_C);
        let s = Smoother::new(spec, &sys, &[1.0; 12]).unwrap();
        let s_hat = c.lower().scale(1.0 / OMEGA_GS_C);
        assert!(max_diff(&s.apply_s_hat_inverse(&x, false).unwrap(), &s_hat.inverse().unwrap().matvec(&x)) < 1e-11);
    }

    /// Exact blocks Â = A and Ŝ = C + BA⁻¹Bᵀ.
    fn exact_blocks(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
        let schur = c.add(&b.matmul(&a.inverse().unwrap()).matmul(&b.transpose()));
        (a.clone(), schur)
    }

    fn exact_solution(k: &DenseMatrix, f: &[f64], g: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = f.iter().chain(g).copied().collect();
        lu_solve(k, &rhs).unwrap()
    }

    #[test]
    fn exact_lower_is_nilpotent_of_index_two() {
        let (n, m) = (8, 4);
        let (a, b, c) = dense_system(n, m, 7);
        let sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let (ah, sh) = exact_blocks(&a, &b, &c);
        let mut s = Smoother::with_dense_blocks(SmootherClass::Lower, &sys, &ah, &sh).unwrap();
        let mut r = rng(8);
        let (f, g) = (random_vec(n, &mut r), random_vec(m, &mut r));
        let x = exact_solution(&saddle(&a, &b, &c), &f, &g);
        let mut u = random_vec(n, &mut r);
        let mut p = random_vec(m, &mut r);
        s.step(&mut u, &mut p, &f, &g);
        s.step(&mut u, &mut p, &f, &g);
        assert!(max_diff(&u, &x[..n]) < 1e-10);
        assert!(max_diff(&p, &x[n..]) < 1e-10);
        // M_ℓ itself is nonzero while M_ℓ² vanishes.
        let mm = smoother_matrix(&mut s, n, m);
        assert!(mm.max_abs() > 1e-3);
        assert!(mm.matmul(&mm).max_abs() < 1e-10);
    }

    #[test]
    fn exact_factorization_solves_in_one_step() {
        let (n, m) = (8, 4);
        let (a, b, c) = dense_system(n, m, 9);
        let sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let (ah, sh) = exact_blocks(&a, &b, &c);
        let mut s = Smoother::with_dense_blocks(SmootherClass::Factorization, &sys, &ah, &sh).unwrap();
        let mut r = rng(10);
        let (f, g) = (random_vec(n, &mut r), random_vec(m, &mut r));
        let x = exact_solution(&saddle(&a, &b, &c), &f, &g);
        let mut u = random_vec(n, &mut r);
        let mut p = random_vec(m, &mut r);
        s.step(&mut u, &mut p, &f, &g);
        assert!(max_diff(&u, &x[..n]) < 1e-10);
        assert!(max_diff(&p, &x[n..]) < 1e-10);
    }

    fn all_specs(omega: f64) -> Vec<SmootherSpec> {
        use SmootherClass::*;
        let mut v: Vec<SmootherSpec> = [Diagonal, Lower, Upper, Factorization]
            .into_iter()
            .map(|c| SmootherSpec::new(c, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass, omega))
            .collect();
        v.push(SmootherSpec::symmetric(omega));
        v.push(SmootherSpec::new(Symmetric, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass, omega));
        v.push(SmootherSpec::braess_sarazin(1.5));
        v
    }

    #[test]
    fn exact_solution_is_a_fixed_point() {
        let (n, m) = (8, 4);
        let (a, b, c) = dense_system(n, m, 11);
        let mut sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let mut r = rng(12);
        sys.f = random_vec(n, &mut r);
        sys.g = random_vec(m, &mut r);
        let x = exact_solution(&saddle(&a, &b, &c), &sys.f, &sys.g);
        for spec in all_specs(0.5) {
            let mut s = Smoother::new(spec, &sys, &[1.0; 4]).unwrap();
            let (mut u, mut p) = (x[..n].to_vec(), x[n..].to_vec());
            s.step(&mut u, &mut p, &sys.f, &sys.g);
            assert!(max_diff(&u, &x[..n]) < 1e-12, "{}", spec.label());
            assert!(max_diff(&p, &x[n..]) < 1e-12, "{}", spec.label());
        }
    }

    #[test]
    fn iteration_operator_agrees_with_preconditioner_path() {
        let (n, m) = (8, 4);
        let (a, b, c) = dense_system(n, m, 13);
        let sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let mut r = rng(14);
        let eu0 = random_vec(n, &mut r);
        let ep0 = random_vec(m, &mut r);
        for spec in all_specs(0.4) {
            let mut s = Smoother::new(spec, &sys, &[0.5; 4]).unwrap();
            let (mut eu, mut ep) = (eu0.clone(), ep0.clone());
            s.iteration_operator_apply(&mut eu, &mut ep);
            let (au, ap) = sys.apply(&eu0, &ep0);
            let (du, dp) = s.apply_preconditioner_inverse(&au, &ap, false).unwrap();
            let tol = if spec.class == SmootherClass::BraessSarazin { 1e-8 } else { 1e-12 };
            for i in 0..n {
                assert!((eu0[i] - eu[i] - du[i]).abs() < tol, "{}", spec.label());
            }
            for i in 0..m {
                assert!((ep0[i] - ep[i] - dp[i]).abs() < tol, "{}", spec.label());
            }
        }
    }

    #[test]
    fn iteration_operators_match_dense_preconditioners() {
        let (n, m) = (8, 4);
        let (a, b, c) = dense_system(n, m, 15);
        let sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let k = saddle(&a, &b, &c);
        let omega = 0.45;
        let mq = [0.7, 1.1, 0.9, 1.3];
        let ah = dense_symgs(&a);
        let sh = DenseMatrix::from_diagonal(&mq).scale(1.0 / omega);
        let ah_inv = ah.inverse().unwrap();
        let bt = b.transpose();
        let p_d = DenseMatrix::from_blocks(&ah, &zeros(n, m), &zeros(m, n), &sh.scale(-1.0));
        let p_l = DenseMatrix::from_blocks(&ah, &zeros(n, m), &b, &sh.scale(-1.0));
        let p_u = p_l.transpose();
        let left = DenseMatrix::from_blocks(&DenseMatrix::identity(n), &zeros(n, m), &b.matmul(&ah_inv), &DenseMatrix::identity(m));
        let right = DenseMatrix::from_blocks(&DenseMatrix::identity(n), &ah_inv.matmul(&bt), &zeros(m, n), &DenseMatrix::identity(m));
        let p_f = left.matmul(&p_d).matmul(&right);
        use SmootherClass::*;
        for (class, p) in [(Diagonal, p_d), (Lower, p_l), (Upper, p_u), (Factorization, p_f)] {
            let spec = SmootherSpec::new(class, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass, omega);
            let mut s = Smoother::new(spec, &sys, &mq).unwrap();
            let got = smoother_matrix(&mut s, n, m);
            assert!(got.sub(&dense_iteration(&p, &k)).max_abs() < 1e-11, "{class:?}");
        }

        // Symmetric class with Â = Lᵀ: a lower step with Â followed by a
        // velocity correction with Âᵀ.
        let at = a.upper();
        let p_l = DenseMatrix::from_blocks(&at, &zeros(n, m), &b, &sh.scale(-1.0));
        let m_vel = DenseMatrix::identity(n + m).sub(
            &DenseMatrix::from_blocks(&at.transpose().inverse().unwrap(), &zeros(n, m), &zeros(m, n), &zeros(m, m)).matmul(&k),
        );
        let expect = m_vel.matmul(&dense_iteration(&p_l, &k));
        let mut s = Smoother::new(SmootherSpec::symmetric(omega), &sys, &mq).unwrap();
        assert!(smoother_matrix(&mut s, n, m).sub(&expect).max_abs() < 1e-11);
    }

    #[test]
    fn adjoint_of_lower_is_upper() {
        let (n, m) = (6, 3);
        let (a, b, c) = dense_system(n, m, 16);
        let sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let lower = Smoother::new(SmootherSpec::lower(0.5), &sys, &[1.0; 3]).unwrap();
        let upper_spec = SmootherSpec::new(SmootherClass::Upper, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass, 0.5);
        let mut upper = Smoother::new(upper_spec, &sys, &[1.0; 3]).unwrap();
        let mut adj = lower.adjoint();
        let d = smoother_matrix(&mut adj, n, m).sub(&smoother_matrix(&mut upper, n, m));
        assert!(d.max_abs() < 1e-13);
    }

    #[test]
    fn braess_sarazin_equals_factorization_with_diagonal_blocks() {
        let (n, m) = (8, 4);
        let (a, b, c) = dense_system(n, m, 17);
        let sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let alpha = 1.7;
        let d = DenseMatrix::from_diagonal(&a.diagonal()).scale(alpha);
        let schur = c.add(&b.matmul(&d.inverse().unwrap()).matmul(&b.transpose()));
        let mut bs = Smoother::new(SmootherSpec::braess_sarazin(alpha), &sys, &[1.0; 4]).unwrap();
        let mut pf = Smoother::with_dense_blocks(SmootherClass::Factorization, &sys, &d, &schur).unwrap();
        let diff = smoother_matrix(&mut bs, n, m).sub(&smoother_matrix(&mut pf, n, m));
        assert!(diff.max_abs() < 1e-8, "{}", diff.max_abs());
    }

    #[test]
    fn spec_validation() {
        let bad = SmootherSpec::new(SmootherClass::Lower, AHatKind::ForwardGs, SHatKind::DampedJacobiMass, 0.5);
        assert!(bad.validate().is_err());
        assert!(SmootherSpec::lower(0.0).validate().is_err());
        assert!(SmootherSpec::braess_sarazin(-1.0).validate().is_err());
        assert!(SmootherSpec::symmetric(0.5).validate().is_ok());
        let sym_forward = SmootherSpec::new(SmootherClass::Symmetric, AHatKind::ForwardGs, SHatKind::DampedGsC, 0.3);
        assert!(sym_forward.validate().is_ok());
        assert_eq!(SmootherSpec::lower(0.5).label(), "Pl(As,S)");
        assert_eq!(SmootherSpec::symmetric(0.5).label(), "Ps(A,S)");
    }

    #[test]
    fn omega_matches_dense_generalized_eigenvalue() {
        let (n, m) = (6, 3);
        let (a, b, c) = dense_system(n, m, 18);
        let sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let mq = [0.3, 0.8, 0.5];
        let est = compute_omega_for(&sys, &mq, false, 1e-12, 5000, 1).unwrap();
        let k = c.add(&b.matmul(&dense_symgs(&a).inverse().unwrap()).matmul(&b.transpose()));
        let dh = DenseMatrix::from_diagonal(&mq.map(|d| 1.0 / d.sqrt()));
        let lambda = max_eigenvalue_symmetric(&dh.matmul(&k).matmul(&dh));
        assert!(((est.lambda_max - lambda) / lambda).abs() < 1e-6, "{} vs {lambda}", est.lambda_max);
        assert!((est.omega - 1.0 / lambda).abs() < 1e-6 / lambda);
        // symmetric_function is an independent route to D^{-1/2}.
        let dh2 = symmetric_function(&DenseMatrix::from_diagonal(&mq), |x| 1.0 / x.sqrt());
        assert!(dh2.sub(&dh).max_abs() < 1e-14);
    }

    #[test]
    fn omega_is_capped_for_a_vanishing_schur_operator() {
        let sys = SaddlePointSystem::from_dense(&DenseMatrix::identity(4), &zeros(3, 4), &zeros(3, 3)).unwrap();
        let est = compute_omega_for(&sys, &[1.0; 3], false, 1e-10, 100, 1).unwrap();
        assert_eq!(est.lambda_max, 0.0);
        assert_eq!(est.omega, OMEGA_MAX);
    }

    #[test]
    fn conditions_on_level_zero() {
        let h = Hierarchy::build(0).unwrap();
        let lv = h.level(0);
        let mq = lv.norm.mq.diagonal();
        let est = compute_omega(&h, 0, OMEGA_TOL, 1).unwrap();
        let s = Smoother::new(SmootherSpec::lower(est.omega), &lv.system, &mq).unwrap();
        let rep = validate_conditions(&s, 3).unwrap();
        assert!(rep.a_hat_lambda_max.unwrap() <= 1.0 + 1e-8);
        assert_eq!(rep.a_hat_dominates, Some(true));
        assert!(rep.sum_condition);
        assert!(rep.schur_margin >= -1e-6, "margin {}", rep.schur_margin);
        assert!(rep.schur_holds);

        let s = Smoother::new(SmootherSpec::lower(2.0 * est.omega), &lv.system, &mq).unwrap();
        let rep = validate_conditions(&s, 3).unwrap();
        assert!(!rep.schur_holds);
        assert!(rep.schur_margin < -0.5);
    }
}
