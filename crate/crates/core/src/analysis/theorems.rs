//! Brute-force verification of the smoothing bounds and the algebraic
//! identities behind them on random dense saddle systems.
//!
//! Everything except the `BraessSarazin`, `Exactness` and
//! `SmootherConsistency` families is built from explicit dense matrices and
//! does not touch the smoother implementation.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::eta::eta;
use crate::assembly::SaddlePointSystem;
use crate::dense::{max_eigenvalue_symmetric, min_eigenvalue_symmetric, spectral_norm, symmetric_function, DenseMatrix};
use crate::error::{Error, Result};
use crate::smoother::{Smoother, SmootherClass, SmootherSpec};
use crate::vector::{dot, norm2};

/// Factor by which constructed approximations exceed their lower bounds.
pub const THEOREM_MARGIN: f64 = 1.05;
pub const MAX_RESAMPLE: usize = 100;
pub const MAX_NU: usize = 10;
pub const DEFAULT_SYSTEMS: usize = 20;
pub const DEFAULT_SIZES: [(usize, usize); 4] = [(8, 4), (16, 8), (24, 12), (40, 20)];

/// Relative slack allowed on inequalities (rounding only).
const BOUND_REL_SLACK: f64 = 1e-9;
const BOUND_ABS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremFamily {
    /// ‖𝒜M_dᵛ‖ ≤ η(ν)‖D_d‖
    DiagonalBound,
    /// ‖𝒜M_fᵛ‖ ≤ η(ν−1)‖D_f‖
    FactorizationBound,
    /// ‖𝒜M_sᵛ‖ ≤ η(ν)‖X_sᵀX_s‖
    SymmetricBound,
    /// ‖𝒜M_ℓᵛ‖, ‖𝒜M_uᵛ‖ ≤ √2 η(ν−1)‖D_d‖
    TriangularBound,
    /// ‖(I−K)Kᵛ‖ ≤ η(ν) for K with both Schur complements ≤ 1
    Corollary,
    /// Both factorized bounds dominate ‖𝒜Mᵛ‖ for an arbitrary similarity
    LemmaEstimates,
    /// I − P_sym⁻¹𝒜 = (I − P_u⁻¹𝒜)(I − P_ℓ⁻¹𝒜)
    SymmetricProduct,
    /// Both representations of Â_r⁻¹
    ArInverse,
    /// (M_ℓ(Ĥ_s,Ŝ))ᵛ = M₂(Ŝ)M₁(Ĥᵀ)(M_s(Ĥᵀ,Ŝ))^{ν−1}M₁(Ĥ)
    IterationLemma,
    /// M_ℓ(Ĥ_s,Ŝ) = M₂M₁(Ĥᵀ)M₁(Ĥ) and M_s(Ĥᵀ,Ŝ) = M₁(Ĥ)M₂M₁(Ĥᵀ)
    FactorSequence,
    /// ⟨P_s x, y⟩ = ⟨x, P_s y⟩ for symmetric Ŝ
    PsSymmetry,
    /// X_sᵀX_s ≤ c̄ D_s with c̄ = 1 + c/2 + √(c²/4 + c)
    RemarkConstant,
    /// B = 0 and exact-block factorization
    Degenerate,
    /// One Braess–Sarazin step equals one P_f(D_α, C + B D_α⁻¹ Bᵀ) step
    BraessSarazin,
    /// Exact-block P_f solves in one step, exact-block P_ℓ in two
    Exactness,
    /// Smoother steps, transposed steps and P⁻¹ agree with dense matrices
    SmootherConsistency,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremCheck {
    pub family: TheoremFamily,
    pub system: usize,
    pub n: usize,
    pub m: usize,
    pub nu: Option<usize>,
    /// Left side of an inequality, or the observed deviation of an identity.
    pub lhs: f64,
    /// Right side of an inequality, or the tolerance of an identity.
    pub rhs: f64,
    pub passed: bool,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub family: TheoremFamily,
    pub checks: usize,
    pub violations: usize,
    /// min (rhs − lhs)/rhs over the family's checks.
    pub min_relative_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub seed: u64,
    pub systems: usize,
    pub sizes: Vec<(usize, usize)>,
    pub resamples: usize,
    pub checks: Vec<TheoremCheck>,
}

impl TheoremReport {
    pub fn violations(&self) -> impl Iterator<Item = &TheoremCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn passed(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn summary(&self) -> Vec<FamilySummary> {
        let mut map: BTreeMap<TheoremFamily, FamilySummary> = BTreeMap::new();
        for c in &self.checks {
            let e = map.entry(c.family).or_insert(FamilySummary {
                family: c.family,
                checks: 0,
                violations: 0,
                min_relative_slack: f64::INFINITY,
            });
            e.checks += 1;
            e.violations += usize::from(!c.passed);
            let slack = if c.rhs > 0.0 { (c.rhs - c.lhs) / c.rhs } else { -c.lhs };
            e.min_relative_slack = e.min_relative_slack.min(slack);
        }
        map.into_values().collect()
    }

    pub fn family(&self, family: TheoremFamily) -> impl Iterator<Item = &TheoremCheck> {
        self.checks.iter().filter(move |c| c.family == family)
    }
}

/// Runs every family on `systems` random systems; system k has the size
/// `sizes[k % sizes.len()]` = (n, m).
pub fn verify_theorems(seed: u64, sizes: &[(usize, usize)], systems: usize) -> Result<TheoremReport> {
    if sizes.is_empty() || sizes.iter().any(|&(n, m)| n == 0 || m == 0) {
        return Err(Error::InvalidSpec("theorem sizes must be nonempty and positive".into()));
    }
    let mut v = Verifier {
        checks: Vec::new(),
        resamples: 0,
    };
    for k in 0..systems {
        let (n, m) = sizes[k % sizes.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64));
        let sys = RandomSystem::new(k, n, m, &mut rng);
        v.diagonal_bound(&sys, &mut rng)?;
        v.factorization_bound(&sys, &mut rng)?;
        v.symmetric_bound(&sys, &mut rng)?;
        v.triangular_bound(&sys, &mut rng)?;
        v.corollary(&sys, &mut rng)?;
        v.symmetric_product(&sys, &mut rng)?;
        v.ar_inverse(&sys, &mut rng)?;
        v.iteration_lemma(&sys, &mut rng)?;
        v.ps_symmetry(&sys, &mut rng)?;
        v.remark_constant(&sys, &mut rng)?;
        v.degenerate(&sys, &mut rng)?;
        v.braess_sarazin(&sys, &mut rng)?;
        v.exactness(&sys, &mut rng)?;
        v.smoother_consistency(&sys, &mut rng)?;
    }
    Ok(TheoremReport {
        seed,
        systems,
        sizes: sizes.to_vec(),
        resamples: v.resamples,
        checks: v.checks,
    })
}

struct RandomSystem {
    index: usize,
    n: usize,
    m: usize,
    a: DenseMatrix,
    b: DenseMatrix,
    c: DenseMatrix,
    /// 𝒜 = [[A, Bᵀ], [B, −C]]
    k: DenseMatrix,
    /// L^{-1/2} of a random SPD norm matrix.
    l_isqrt: DenseMatrix,
}

impl RandomSystem {
    fn new(index: usize, n: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = DenseMatrix::random_spd(n, 0.5, rng).scale(1.0 / n as f64);
        let b = DenseMatrix::random(m, n, rng).scale(0.5);
        let c = DenseMatrix::random_spd(m, 0.1, rng).scale(0.2 / m as f64);
        let k = saddle(&a, &b, &c);
        let dim = n + m;
        let l = DenseMatrix::random_spd(dim, 0.5, rng).scale(1.0 / dim as f64);
        let l_isqrt = symmetric_function(&l, |x| 1.0 / x.sqrt());
        Self {
            index,
            n,
            m,
            a,
            b,
            c,
            k,
            l_isqrt,
        }
    }

    fn l_norm(&self, x: &DenseMatrix) -> f64 {
        spectral_norm(&self.l_isqrt.matmul(x).matmul(&self.l_isqrt))
    }

    fn bt(&self) -> DenseMatrix {
        self.b.transpose()
    }

    /// C + B X⁻¹ Bᵀ
    fn schur(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.c.add(&self.b.matmul(&x.inverse()?).matmul(&self.bt())))
    }
}

struct Verifier {
    checks: Vec<TheoremCheck>,
    resamples: usize,
}

fn saddle(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_blocks(a, &b.transpose(), b, &c.scale(-1.0))
}

fn block_diag(x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_blocks(
        x,
        &DenseMatrix::zeros(x.rows(), y.cols()),
        &DenseMatrix::zeros(y.rows(), x.cols()),
        y,
    )
}

/// I − P⁻¹𝒜
fn iteration_matrix(p: &DenseMatrix, k: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(DenseMatrix::identity(k.rows()).sub(&p.inverse()?.matmul(k)))
}

/// Â_s = Â(Â + Âᵀ − A)⁻¹Âᵀ
fn symmetrized_hat(a_hat: &DenseMatrix, a: &DenseMatrix) -> Result<DenseMatrix> {
    let w = a_hat.add(&a_hat.transpose()).sub(a);
    Ok(a_hat.matmul(&w.inverse()?).matmul(&a_hat.transpose()).symmetrized())
}

/// Random PSD matrix GᵀG/n scaled to max entry ≈ `size`.
fn psd(n: usize, size: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let g = DenseMatrix::random(n, n, rng);
    let p = g.transpose().matmul(&g);
    let s = p.max_abs().max(f64::MIN_POSITIVE);
    p.scale(size / s)
}

fn skew(n: usize, size: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let g = DenseMatrix::random(n, n, rng);
    g.sub(&g.transpose()).scale(size / 2.0)
}

/// margin·X plus a small PSD perturbation, so that the result exceeds X.
fn dominate(x: &DenseMatrix, rng: &mut ChaCha8Rng) -> DenseMatrix {
    x.scale(THEOREM_MARGIN).add(&psd(x.rows(), 0.02 * x.max_abs(), rng)).symmetrized()
}

/// Nonsymmetric Â with Â + Âᵀ − A = E ≻ 0: either a Gauss–Seidel triangle
/// of A or a symmetric part plus a skew part.
fn nonsymmetric_hat(a: &DenseMatrix, flavour: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    if flavour.is_multiple_of(2) {
        a.lower()
    } else {
        let e = a.scale(0.05).add(&psd(a.rows(), 0.05 * a.max_abs(), rng));
        a.add(&e).scale(0.5).add(&skew(a.rows(), 0.3 * a.max_abs(), rng))
    }
}

fn is_psd(x: &DenseMatrix, scale: f64) -> bool {
    min_eigenvalue_symmetric(&x.symmetrized()) >= -1e-10 * scale.max(1.0)
}

fn rel_diff(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    x.sub(y).max_abs() / x.max_abs().max(y.max_abs()).max(1.0)
}

impl Verifier {
    #[allow(clippy::too_many_arguments)]
    fn bound(&mut self, family: TheoremFamily, s: &RandomSystem, nu: Option<usize>, lhs: f64, rhs: f64, note: &'static str) {
        let passed = lhs.is_finite() && rhs.is_finite() && lhs <= rhs * (1.0 + BOUND_REL_SLACK) + BOUND_ABS_SLACK;
        self.checks.push(TheoremCheck {
            family,
            system: s.index,
            n: s.n,
            m: s.m,
            nu,
            lhs,
            rhs,
            passed,
            note,
        });
    }

    fn identity(&mut self, family: TheoremFamily, s: &RandomSystem, nu: Option<usize>, deviation: f64, tol: f64, note: &'static str) {
        self.checks.push(TheoremCheck {
            family,
            system: s.index,
            n: s.n,
            m: s.m,
            nu,
            lhs: deviation,
            rhs: tol,
            passed: deviation.is_finite() && deviation <= tol,
            note,
        });
    }

    /// Draws until `build` yields approximations whose hypotheses hold.
    fn sample<T>(
        &mut self,
        rng: &mut ChaCha8Rng,
        mut build: impl FnMut(&mut ChaCha8Rng) -> Result<Option<T>>,
    ) -> Result<T> {
        for attempt in 0..MAX_RESAMPLE {
            match build(rng) {
                Ok(Some(t)) => return Ok(t),
                Ok(None) | Err(Error::SingularMatrix { .. }) => {
                    if attempt + 1 == MAX_RESAMPLE {
                        break;
                    }
                    self.resamples += 1;
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::InvalidSpec(format!(
            "could not sample matrices satisfying the hypotheses in {MAX_RESAMPLE} attempts"
        )))
    }

    /// ‖𝒜Mᵛ‖ ≤ factor(ν)·‖D‖ in the Euclidean and a random L norm.
    #[allow(clippy::too_many_arguments)]
    fn power_bounds(
        &mut self,
        family: TheoremFamily,
        s: &RandomSystem,
        m_iter: &DenseMatrix,
        d: &DenseMatrix,
        factor: impl Fn(usize) -> f64,
        note: &'static str,
    ) {
        let d_norm = spectral_norm(d);
        let d_l = s.l_norm(d);
        let mut g = s.k.clone();
        for nu in 1..=MAX_NU {
            g = g.matmul(m_iter);
            self.bound(family, s, Some(nu), spectral_norm(&g), factor(nu) * d_norm, note);
            self.bound(family, s, Some(nu), s.l_norm(&g), factor(nu) * d_l, note);
        }
    }

    fn diagonal_bound(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a_hat, s_hat) = self.sample(rng, |rng| {
            let xa = s.a.add(&s.bt().matmul(&s.c.inverse()?).matmul(&s.b));
            let xs = s.schur(&s.a)?;
            let (ah, sh) = (dominate(&xa, rng), dominate(&xs, rng));
            let ok = is_psd(&ah.sub(&xa), xa.max_abs()) && is_psd(&sh.sub(&xs), xs.max_abs());
            Ok(ok.then_some((ah, sh)))
        })?;
        let p = block_diag(&a_hat, &s_hat.scale(-1.0));
        let m = iteration_matrix(&p, &s.k)?;
        let d = block_diag(&a_hat, &s_hat);
        self.power_bounds(TheoremFamily::DiagonalBound, s, &m, &d, eta, "P_d");
        Ok(())
    }

    fn factorization_bound(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a_hat, s_hat, xs) = self.sample(rng, |rng| {
            let ah = dominate(&s.a, rng);
            let xs = s.schur(&ah)?;
            let sh = dominate(&xs, rng);
            let ok = is_psd(&ah.sub(&s.a), s.a.max_abs()) && is_psd(&sh.sub(&xs), xs.max_abs());
            Ok(ok.then_some((ah, sh, xs)))
        })?;
        let p = factorization_preconditioner(s, &a_hat, &s_hat)?;
        let m = iteration_matrix(&p, &s.k)?;
        let d = block_diag(&a_hat.sub(&s.a), &s_hat.sub(&xs));
        self.power_bounds(TheoremFamily::FactorizationBound, s, &m, &d, |nu| eta(nu - 1), "P_f");
        Ok(())
    }

    fn symmetric_bound(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let flavour = s.index;
        let (a_hat, s_hat) = self.sample(rng, |rng| {
            let ah = nonsymmetric_hat(&s.a, flavour, rng);
            let w = ah.add(&ah.transpose()).sub(&s.a);
            let xs = s.schur(&s.a)?;
            let sh = dominate(&xs, rng);
            let ok = min_eigenvalue_symmetric(&w.symmetrized()) > 0.0 && is_psd(&sh.sub(&xs), xs.max_abs());
            Ok(ok.then_some((ah, sh)))
        })?;
        let p = symmetric_preconditioner(s, &a_hat, &s_hat)?;
        let m = iteration_matrix(&p, &s.k)?;
        let up = upper_factor(s, &a_hat.transpose())?;
        let d_s = block_diag(&symmetrized_hat(&a_hat, &s.a)?, &s_hat);
        let xtx = up.transpose().matmul(&d_s).matmul(&up);
        self.power_bounds(TheoremFamily::SymmetricBound, s, &m, &xtx, eta, "P_s");
        Ok(())
    }

    fn triangular_bound(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a_hat, s_hat) = self.sample(rng, |rng| {
            let ah = dominate(&s.a, rng);
            let xs = s.schur(&s.a)?;
            let sh = dominate(&xs, rng);
            let ok = is_psd(&ah.sub(&s.a), s.a.max_abs()) && is_psd(&sh.sub(&xs), xs.max_abs());
            Ok(ok.then_some((ah, sh)))
        })?;
        let p_l = lower_preconditioner(s, &a_hat, &s_hat);
        let d = block_diag(&a_hat, &s_hat);
        let f = |nu: usize| std::f64::consts::SQRT_2 * eta(nu - 1);
        let m_l = iteration_matrix(&p_l, &s.k)?;
        self.power_bounds(TheoremFamily::TriangularBound, s, &m_l, &d, f, "P_l");
        let m_u = iteration_matrix(&p_l.transpose(), &s.k)?;
        self.power_bounds(TheoremFamily::TriangularBound, s, &m_u, &d, f, "P_u");
        self.lemma_estimates(s, &p_l, &m_l, rng)
    }

    /// Both estimates of the lemma with a random similarity X.
    fn lemma_estimates(&mut self, s: &RandomSystem, p: &DenseMatrix, m: &DenseMatrix, rng: &mut ChaCha8Rng) -> Result<()> {
        let dim = s.n + s.m;
        let x = DenseMatrix::random(dim, dim, rng).add(&DenseMatrix::identity(dim).scale(2.0 * (dim as f64).sqrt()));
        let x_inv = x.inverse()?;
        let mbar = x.matmul(m).matmul(&x_inv);
        let i_minus = DenseMatrix::identity(dim).sub(&mbar);
        let f1 = spectral_norm(&x_inv.transpose().matmul(p).matmul(&x_inv));
        let f2 = spectral_norm(&x_inv.transpose().matmul(&p.sub(&s.k)).matmul(&x_inv));
        let xtx_l = s.l_norm(&x.transpose().matmul(&x));
        let mut g = s.k.clone();
        let mut mbar_prev = DenseMatrix::identity(dim);
        for nu in 1..=MAX_NU {
            g = g.matmul(m);
            let mbar_nu = mbar_prev.matmul(&mbar);
            let lhs = s.l_norm(&g);
            let first = spectral_norm(&i_minus.matmul(&mbar_nu)) * f1 * xtx_l;
            let second = spectral_norm(&i_minus.matmul(&mbar_prev)) * f2 * xtx_l;
            self.bound(TheoremFamily::LemmaEstimates, s, Some(nu), lhs, first, "first estimate");
            self.bound(TheoremFamily::LemmaEstimates, s, Some(nu), lhs, second, "second estimate");
            mbar_prev = mbar_nu;
        }
        Ok(())
    }

    fn corollary(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let (n, m) = (s.n, s.m);
        let k = self.sample(rng, |rng| {
            let mm = DenseMatrix::random_spd(n, 0.1, rng).scale(1.0 / n as f64);
            let nn = DenseMatrix::random_spd(m, 0.1, rng).scale(1.0 / m as f64);
            let r = DenseMatrix::random(m, n, rng).scale(0.5);
            let s_m = mm.add(&r.transpose().matmul(&nn.inverse()?).matmul(&r));
            let s_n = nn.add(&r.matmul(&mm.inverse()?).matmul(&r.transpose()));
            let lam = max_eigenvalue_symmetric(&s_m.symmetrized()).max(max_eigenvalue_symmetric(&s_n.symmetrized()));
            if !(lam > 0.0) {
                return Ok(None);
            }
            let t = 1.0 / (THEOREM_MARGIN * lam);
            let k = DenseMatrix::from_blocks(&mm, &r.transpose(), &r.scale(-1.0), &nn).scale(t);
            Ok(Some(k))
        })?;
        let dim = n + m;
        let i_minus = DenseMatrix::identity(dim).sub(&k);
        let mut kp = DenseMatrix::identity(dim);
        for nu in 1..=MAX_NU {
            kp = kp.matmul(&k);
            self.bound(TheoremFamily::Corollary, s, Some(nu), spectral_norm(&i_minus.matmul(&kp)), eta(nu), "K");
        }
        Ok(())
    }

    fn symmetric_product(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let flavour = s.index + 1;
        let (a_hat, s_hat) = self.sample(rng, |rng| {
            let ah = nonsymmetric_hat(&s.a, flavour, rng);
            let e = s.c.scale(0.1).add(&psd(s.m, 0.1 * s.c.max_abs() + 0.1, rng));
            let sh = s.c.add(&e).scale(0.5).add(&skew(s.m, 0.2 * s.c.max_abs(), rng));
            let w = ah.add(&ah.transpose()).sub(&s.a);
            Ok((min_eigenvalue_symmetric(&w.symmetrized()) > 0.0).then_some((ah, sh)))
        })?;
        let p_l = lower_preconditioner(s, &a_hat, &s_hat);
        let p_u = p_l.transpose();
        let a_s = symmetrized_hat(&a_hat, &s.a)?;
        let s_s = s_hat
            .matmul(&s_hat.add(&s_hat.transpose()).sub(&s.c).inverse()?)
            .matmul(&s_hat.transpose());
        let lo = upper_factor(s, &a_hat.transpose())?.transpose();
        let up = upper_factor(s, &a_hat.transpose())?;
        let p_sym = lo.matmul(&block_diag(&a_s, &s_s.scale(-1.0))).matmul(&up);
        let lhs = iteration_matrix(&p_sym, &s.k)?;
        let rhs = iteration_matrix(&p_u, &s.k)?.matmul(&iteration_matrix(&p_l, &s.k)?);
        self.identity(TheoremFamily::SymmetricProduct, s, None, rel_diff(&lhs, &rhs), 1e-9, "factored P_sym");
        // The closed form P_ℓ(P_ℓ + P_u − 𝒜)⁻¹P_u describes the same matrix.
        let closed = p_l.matmul(&p_l.add(&p_u).sub(&s.k).inverse()?).matmul(&p_u);
        self.identity(TheoremFamily::SymmetricProduct, s, None, rel_diff(&closed, &p_sym), 1e-9, "closed form");
        Ok(())
    }

    fn ar_inverse(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let flavour = s.index;
        let a_hat = self.sample(rng, |rng| {
            let ah = nonsymmetric_hat(&s.a, flavour + 1, rng);
            let w = ah.add(&ah.transpose()).sub(&s.a);
            Ok((min_eigenvalue_symmetric(&w.symmetrized()) > 0.0).then_some(ah))
        })?;
        let n = s.n;
        let id = DenseMatrix::identity(n);
        let w = a_hat.add(&a_hat.transpose()).sub(&s.a);
        let a_r = a_hat.transpose().matmul(&w.inverse()?).matmul(&a_hat);
        let a_inv = s.a.inverse()?;
        let left = id.sub(&a_hat.inverse()?.matmul(&s.a));
        let right = id.sub(&s.a.matmul(&a_hat.transpose().inverse()?));
        let second = a_inv.sub(&left.matmul(&a_inv).matmul(&right));
        let ar_inv = a_r.inverse()?;
        self.identity(TheoremFamily::ArInverse, s, None, rel_diff(&ar_inv, &second), 1e-9, "A^-1 form");
        let a_s = symmetrized_hat(&a_hat, &s.a)?;
        if let Ok(x) = a_s.sub(&s.a).inverse() {
            let first = left.matmul(&x).matmul(&right);
            self.identity(TheoremFamily::ArInverse, s, None, rel_diff(&ar_inv, &first), 1e-8, "(A_s - A)^-1 form");
        }
        Ok(())
    }

    fn iteration_lemma(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let h = s.a.lower();
        let s_hat = dominate(&s.schur(&s.a)?, rng);
        let h_s = symmetrized_hat(&h, &s.a)?;
        let m_l = iteration_matrix(&lower_preconditioner(s, &h_s, &s_hat), &s.k)?;
        let m_s = iteration_matrix(&symmetric_preconditioner(s, &h.transpose(), &s_hat)?, &s.k)?;
        let m1 = |p: &DenseMatrix| -> Result<DenseMatrix> {
            let p_inv = p.inverse()?;
            Ok(DenseMatrix::from_blocks(
                &DenseMatrix::identity(s.n).sub(&p_inv.matmul(&s.a)),
                &p_inv.matmul(&s.bt()).scale(-1.0),
                &DenseMatrix::zeros(s.m, s.n),
                &DenseMatrix::identity(s.m),
            ))
        };
        let r_inv = s_hat.inverse()?;
        let m2 = DenseMatrix::from_blocks(
            &DenseMatrix::identity(s.n),
            &DenseMatrix::zeros(s.n, s.m),
            &r_inv.matmul(&s.b),
            &DenseMatrix::identity(s.m).sub(&r_inv.matmul(&s.c)),
        );
        let m1_h = m1(&h)?;
        let m1_ht = m1(&h.transpose())?;
        let seq_l = m2.matmul(&m1_ht).matmul(&m1_h);
        let seq_s = m1_h.matmul(&m2).matmul(&m1_ht);
        self.identity(TheoremFamily::FactorSequence, s, None, rel_diff(&m_l, &seq_l), 1e-9, "M_l");
        self.identity(TheoremFamily::FactorSequence, s, None, rel_diff(&m_s, &seq_s), 1e-9, "M_s");
        let prefix = m2.matmul(&m1_ht);
        for nu in [1usize, 2, 3, 5] {
            let mut lhs = DenseMatrix::identity(s.n + s.m);
            for _ in 0..nu {
                lhs = lhs.matmul(&m_l);
            }
            let mut mid = DenseMatrix::identity(s.n + s.m);
            for _ in 1..nu {
                mid = mid.matmul(&m_s);
            }
            let rhs = prefix.matmul(&mid).matmul(&m1_h);
            self.identity(TheoremFamily::IterationLemma, s, Some(nu), rel_diff(&lhs, &rhs), 1e-9, "power relation");
        }
        Ok(())
    }

    fn ps_symmetry(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let a_hat = nonsymmetric_hat(&s.a, s.index + 1, rng);
        let s_hat = dominate(&s.schur(&s.a)?, rng);
        let up = upper_factor(s, &a_hat.transpose())?;
        let lo = up.transpose();
        let d = block_diag(&symmetrized_hat(&a_hat, &s.a)?, &s_hat.scale(-1.0));
        let apply = |x: &[f64]| lo.matvec(&d.matvec(&up.matvec(x)));
        let dim = s.n + s.m;
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (px, py) = (apply(&x), apply(&y));
        let scale = norm2(&px) * norm2(&y) + norm2(&x) * norm2(&py);
        let dev = (dot(&px, &y) - dot(&x, &py)).abs() / scale.max(f64::MIN_POSITIVE);
        self.identity(TheoremFamily::PsSymmetry, s, None, dev, 1e-12, "factored P_s");
        Ok(())
    }

    fn remark_constant(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let a_hat = nonsymmetric_hat(&s.a, s.index, rng);
        let s_hat = dominate(&s.schur(&s.a)?, rng);
        let w = a_hat.add(&a_hat.transpose()).sub(&s.a).symmetrized();
        let a_s = symmetrized_hat(&a_hat, &s.a)?;
        let w_isqrt = symmetric_function(&w, |x| 1.0 / x.sqrt());
        let c = max_eigenvalue_symmetric(&w_isqrt.matmul(&a_s).matmul(&w_isqrt).symmetrized());
        let c_bar = 1.0 + c / 2.0 + (c * c / 4.0 + c).sqrt();
        let up = upper_factor(s, &a_hat.transpose())?;
        let d_s = block_diag(&a_s, &s_hat);
        let xtx = up.transpose().matmul(&d_s).matmul(&up);
        let d_isqrt = symmetric_function(&d_s.symmetrized(), |x| 1.0 / x.sqrt());
        let lam = max_eigenvalue_symmetric(&d_isqrt.matmul(&xtx).matmul(&d_isqrt).symmetrized());
        self.bound(TheoremFamily::RemarkConstant, s, None, lam, c_bar, "X_s^T X_s <= c_bar D_s");
        Ok(())
    }

    fn degenerate(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        // B = 0: the block-diagonal smoother decouples.
        let zero_b = DenseMatrix::zeros(s.m, s.n);
        let k0 = saddle(&s.a, &zero_b, &s.c);
        let a_hat = dominate(&s.a, rng);
        let s_hat = dominate(&s.c, rng);
        let m = iteration_matrix(&block_diag(&a_hat, &s_hat.scale(-1.0)), &k0)?;
        let d_norm = spectral_norm(&block_diag(&a_hat, &s_hat));
        let mut g = k0.clone();
        for nu in 1..=MAX_NU {
            g = g.matmul(&m);
            self.bound(TheoremFamily::Degenerate, s, Some(nu), spectral_norm(&g), eta(nu) * d_norm, "B = 0");
        }
        // Exact factorization: 𝒜M_f = 0.
        let p = factorization_preconditioner(s, &s.a, &s.schur(&s.a)?)?;
        let g = s.k.matmul(&iteration_matrix(&p, &s.k)?);
        let tol = 1e-10 * spectral_norm(&s.k);
        self.identity(TheoremFamily::Degenerate, s, Some(1), spectral_norm(&g), tol, "exact P_f");
        Ok(())
    }

    fn braess_sarazin(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let alpha = rng.gen_range(1.0..3.0);
        let sys = SaddlePointSystem::from_dense(&s.a, &s.b, &s.c)?;
        let mut bs = Smoother::new(SmootherSpec::braess_sarazin(alpha), &sys, &vec![1.0; s.m])?;
        let d_alpha = DenseMatrix::from_diagonal(&s.a.diagonal().iter().map(|d| alpha * d).collect::<Vec<_>>());
        let s_alpha = s.schur(&d_alpha)?;
        let p = factorization_preconditioner(s, &d_alpha, &s_alpha)?;
        let (x, rhs) = random_state(s, rng);
        let mut u = x[..s.n].to_vec();
        let mut q = x[s.n..].to_vec();
        bs.step(&mut u, &mut q, &rhs[..s.n], &rhs[s.n..]);
        let expected = dense_step(&p, &s.k, &x, &rhs)?;
        let got: Vec<f64> = u.into_iter().chain(q).collect();
        self.identity(TheoremFamily::BraessSarazin, s, None, vec_rel_diff(&got, &expected), 1e-7, "one step");
        Ok(())
    }

    fn exactness(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let sys = SaddlePointSystem::from_dense(&s.a, &s.b, &s.c)?;
        let schur = s.schur(&s.a)?;
        let (x, rhs) = random_state(s, rng);
        let exact = crate::dense::lu_solve(&s.k, &rhs)?;
        for (class, steps, note) in [
            (SmootherClass::Factorization, 1, "P_f one step"),
            (SmootherClass::Lower, 2, "P_l two steps"),
        ] {
            let mut sm = Smoother::with_dense_blocks(class, &sys, &s.a, &schur)?;
            let mut u = x[..s.n].to_vec();
            let mut q = x[s.n..].to_vec();
            for _ in 0..steps {
                sm.step(&mut u, &mut q, &rhs[..s.n], &rhs[s.n..]);
            }
            let got: Vec<f64> = u.into_iter().chain(q).collect();
            self.identity(TheoremFamily::Exactness, s, Some(steps), vec_rel_diff(&got, &exact), 1e-10, note);
        }
        Ok(())
    }

    fn smoother_consistency(&mut self, s: &RandomSystem, rng: &mut ChaCha8Rng) -> Result<()> {
        let sys = SaddlePointSystem::from_dense(&s.a, &s.b, &s.c)?;
        let spd = dominate(&s.a, rng);
        let s_hat = dominate(&s.schur(&s.a)?, rng);
        let nonsym = nonsymmetric_hat(&s.a, s.index + 1, rng);
        let cases: [(SmootherClass, &DenseMatrix, DenseMatrix); 5] = [
            (SmootherClass::Diagonal, &spd, block_diag(&spd, &s_hat.scale(-1.0))),
            (SmootherClass::Lower, &spd, lower_preconditioner(s, &spd, &s_hat)),
            (SmootherClass::Upper, &spd, lower_preconditioner(s, &spd, &s_hat).transpose()),
            (SmootherClass::Factorization, &spd, factorization_preconditioner(s, &spd, &s_hat)?),
            (SmootherClass::Symmetric, &nonsym, symmetric_preconditioner(s, &nonsym, &s_hat)?),
        ];
        for (class, a_hat, p) in cases {
            let mut sm = Smoother::with_dense_blocks(class, &sys, a_hat, &s_hat)?;
            let m = iteration_matrix(&p, &s.k)?;
            let (x, _) = random_state(s, rng);
            let (mut u, mut q) = (x[..s.n].to_vec(), x[s.n..].to_vec());
            sm.iteration_operator_apply(&mut u, &mut q);
            let got: Vec<f64> = u.into_iter().chain(q).collect();
            self.identity(TheoremFamily::SmootherConsistency, s, None, vec_rel_diff(&got, &m.matvec(&x)), 1e-10, "M e");
            let (mut u, mut q) = (x[..s.n].to_vec(), x[s.n..].to_vec());
            sm.iteration_operator_transpose_apply(&mut u, &mut q)?;
            let got: Vec<f64> = u.into_iter().chain(q).collect();
            let mt = m.transpose().matvec(&x);
            self.identity(TheoremFamily::SmootherConsistency, s, None, vec_rel_diff(&got, &mt), 1e-10, "M^T y");
            let (du, dq) = sm.apply_preconditioner_inverse(&x[..s.n], &x[s.n..], false)?;
            let got: Vec<f64> = du.into_iter().chain(dq).collect();
            let want = crate::dense::lu_solve(&p, &x)?;
            self.identity(TheoremFamily::SmootherConsistency, s, None, vec_rel_diff(&got, &want), 1e-10, "P^-1 r");
        }
        Ok(())
    }
}

/// [[Â, 0], [B, −Ŝ]]
fn lower_preconditioner(s: &RandomSystem, a_hat: &DenseMatrix, s_hat: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_blocks(a_hat, &DenseMatrix::zeros(s.n, s.m), &s.b, &s_hat.scale(-1.0))
}

/// [[Â, Bᵀ], [B, BÂ⁻¹Bᵀ − Ŝ]]
fn factorization_preconditioner(s: &RandomSystem, a_hat: &DenseMatrix, s_hat: &DenseMatrix) -> Result<DenseMatrix> {
    let bab = s.b.matmul(&a_hat.inverse()?).matmul(&s.bt());
    Ok(DenseMatrix::from_blocks(a_hat, &s.bt(), &s.b, &bab.sub(s_hat)))
}

/// [[I, X⁻¹Bᵀ], [0, I]]
fn upper_factor(s: &RandomSystem, x: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(DenseMatrix::from_blocks(
        &DenseMatrix::identity(s.n),
        &x.inverse()?.matmul(&s.bt()),
        &DenseMatrix::zeros(s.m, s.n),
        &DenseMatrix::identity(s.m),
    ))
}

/// [[I, 0], [BÂ⁻¹, I]]·diag(Â_s, −Ŝ)·[[I, Â⁻ᵀBᵀ], [0, I]]
fn symmetric_preconditioner(s: &RandomSystem, a_hat: &DenseMatrix, s_hat: &DenseMatrix) -> Result<DenseMatrix> {
    let up = upper_factor(s, &a_hat.transpose())?;
    let lo = DenseMatrix::from_blocks(
        &DenseMatrix::identity(s.n),
        &DenseMatrix::zeros(s.n, s.m),
        &s.b.matmul(&a_hat.inverse()?),
        &DenseMatrix::identity(s.m),
    );
    let d = block_diag(&symmetrized_hat(a_hat, &s.a)?, &s_hat.scale(-1.0));
    Ok(lo.matmul(&d).matmul(&up))
}

fn random_state(s: &RandomSystem, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let dim = s.n + s.m;
    let x = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (x, b)
}

/// x + P⁻¹(b − 𝒜x)
fn dense_step(p: &DenseMatrix, k: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let kx = k.matvec(x);
    let r: Vec<f64> = b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect();
    let d = crate::dense::lu_solve(p, &r)?;
    Ok(x.iter().zip(&d).map(|(xi, di)| xi + di).collect())
}

fn vec_rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    norm2(&diff) / norm2(y).max(1.0)
}
