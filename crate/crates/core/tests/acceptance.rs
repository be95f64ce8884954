//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance` runs everything (level 4
//! included, roughly a quarter of an hour on one core). Pass criterion
//! numbers to select, e.g. `-- 1 2 9`, and `--quick` to stay at level 3.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uzawa_mg::analysis::{
    eta, relative_costs, smoothing_norm, smoothing_rate_report, verify_theorems, CostTable, RateSample,
    TheoremFamily, DEFAULT_SIZES, DEFAULT_SYSTEMS, SMOOTHING_TOL,
};
use uzawa_mg::dense::{lu_solve, DenseMatrix};
use uzawa_mg::multigrid::RateOptions;
use uzawa_mg::smoother::{compute_omega, AHatKind, SHatKind, Smoother, SmootherClass, OMEGA_SYMGS_C, OMEGA_TOL};
use uzawa_mg::{CycleSpec, Hierarchy, MultigridSolver, SaddlePointSystem, SmootherSpec};

/// Damping of Ŝ = ω⁻¹ diag M_q used by the reference experiments.
const OMEGA: f64 = 0.55849;
const SEED: u64 = 7;

struct Outcome {
    passed: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Self {
            passed,
            summary: summary.into(),
            details: Vec::new(),
        }
    }
}

struct Run {
    hierarchy: Hierarchy,
    quick: bool,
    /// W-cycle rates keyed by (label, level, ν).
    rates: BTreeMap<(String, usize, usize), f64>,
}

impl Run {
    fn top(&self) -> usize {
        self.hierarchy.max_level()
    }

    fn rate(&mut self, spec: SmootherSpec, level: usize, nu: usize) -> f64 {
        let key = (spec.label(), level, nu);
        if let Some(&r) = self.rates.get(&key) {
            return r;
        }
        let mut mg = MultigridSolver::new(&self.hierarchy, CycleSpec::w_cycle(nu), spec, level).expect("solver");
        let est = mg.asymptotic_rate(RateOptions::default()).expect("rate");
        let r = if est.diverged { f64::INFINITY } else { est.rate };
        self.rates.insert(key, r);
        r
    }
}

fn lower() -> SmootherSpec {
    SmootherSpec::lower(OMEGA)
}

fn symmetric() -> SmootherSpec {
    SmootherSpec::symmetric(OMEGA)
}

fn criterion_1() -> Outcome {
    let expect = [1.0, 0.5, 0.5, 0.375, 0.375, 0.3125, 0.3125, 0.273438, 0.273438, 0.246094, 0.246094];
    let got: Vec<f64> = (0..=10).map(eta).collect();
    let passed = got.iter().zip(&expect).all(|(g, e)| format!("{g:.6}") == format!("{e:.6}"));
    let shown: Vec<String> = got.iter().map(|v| format!("{v:.6}")).collect();
    Outcome::new(passed, format!("eta(0..10) = {}", shown.join(", ")))
}

fn criterion_2(run: &Run) -> Outcome {
    let est = compute_omega(&run.hierarchy, 0, OMEGA_TOL, SEED).expect("omega");
    let passed = (est.omega - OMEGA).abs() <= 0.005;
    let mut o = Outcome::new(
        passed,
        format!("omega = {:.5} on level 0 (expected {OMEGA} +- 0.005)", est.omega),
    );
    o.details.push(format!(
        "lambda_max = {:.6}, {} iterations, converged = {}",
        est.lambda_max, est.iterations, est.converged
    ));
    o
}

fn criterion_3(run: &mut Run) -> Outcome {
    let columns = [(1, 0.857), (2, 0.74), (4, 0.556), (6, 0.420), (8, 0.320)];
    let levels: Vec<usize> = (2..=run.top()).collect();
    let mut passed = true;
    let mut o = Outcome::new(true, "");
    for spec in [lower(), symmetric()] {
        for &(nu, want) in &columns {
            let rates: Vec<f64> = levels.iter().map(|&l| run.rate(spec, l, nu)).collect();
            let within = rates.iter().all(|r| (r - want).abs() <= 0.02);
            let spread = rates.iter().cloned().fold(f64::MIN, f64::max) - rates.iter().cloned().fold(f64::MAX, f64::min);
            let ok = within && spread < 0.03;
            passed &= ok;
            let shown: Vec<String> = levels.iter().zip(&rates).map(|(l, r)| format!("L{l} {r:.4}")).collect();
            o.details.push(format!(
                "{} {} nu={nu}: {} (expected {want} +- 0.02, spread {spread:.4})",
                if ok { "ok  " } else { "MISS" },
                spec.label(),
                shown.join(", ")
            ));
        }
    }
    o.passed = passed;
    o.summary = format!("W-cycle rates, levels {:?}, 2 variants x 5 nu", levels);
    o
}

fn iterations(run: &Run, cycle: CycleSpec, spec: SmootherSpec, level: usize) -> (usize, bool, bool) {
    let mut mg = MultigridSolver::new(&run.hierarchy, cycle, spec, level).expect("solver");
    let r = mg.solve(None).expect("solve");
    (r.iterations, r.converged, r.diverged)
}

fn criterion_4(run: &Run) -> Outcome {
    let sts = lower().with_s_hat(SHatKind::DampedSymgsC, OMEGA_SYMGS_C);
    let cases = [
        (lower(), 2, 31),
        (lower(), 4, 17),
        (lower(), 6, 12),
        (lower(), 8, 9),
        (sts, 4, 10),
        (sts, 6, 6),
        (sts, 8, 5),
    ];
    let mut o = Outcome::new(true, "level 3 W-cycle iteration counts, epsilon = 1e-8");
    for (spec, nu, want) in cases {
        let (it, conv, _) = iterations(run, CycleSpec::w_cycle(nu), spec, 3);
        let ok = conv && it.abs_diff(want) <= 2;
        o.passed &= ok;
        o.details.push(format!(
            "{} {} nu={nu}: {it} iterations, converged = {conv} (expected {want} +- 2)",
            if ok { "ok  " } else { "MISS" },
            spec.label()
        ));
    }
    o
}

fn criterion_5(run: &Run) -> Outcome {
    let (it1, _, div1) = iterations(run, CycleSpec::v_cycle(1), lower(), 3);
    let (it4, conv4, _) = iterations(run, CycleSpec::v_cycle(4), lower(), 3);
    let passed = div1 && it1 <= 200 && conv4 && it4.abs_diff(18) <= 3;
    Outcome::new(
        passed,
        format!(
            "V-cycle level 3: nu=1 diverged = {div1} after {it1} cycles; nu=4 {it4} iterations, converged = {conv4} (expected 18 +- 3)"
        ),
    )
}

fn criterion_6(run: &Run) -> Outcome {
    let level = 3;
    let nus: Vec<usize> = (1..=8).collect();
    let variants: [(&str, SmootherSpec, bool); 5] = [
        ("lower", lower(), true),
        (
            "upper",
            SmootherSpec::new(SmootherClass::Upper, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass, OMEGA),
            true,
        ),
        (
            "factorization",
            SmootherSpec::new(SmootherClass::Factorization, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass, OMEGA),
            false,
        ),
        (
            "symmetric-as",
            SmootherSpec::new(SmootherClass::Symmetric, AHatKind::SymmetricGs, SHatKind::DampedJacobiMass, OMEGA),
            true,
        ),
        ("symmetric", symmetric(), true),
    ];
    let mut o = Outcome::new(true, format!("smoothing norms at level {level}, nu = 1..8"));
    for (name, spec, sqrt_law) in variants {
        let rep = smoothing_rate_report(&run.hierarchy, level, spec, &nus, SMOOTHING_TOL).expect("smoothing norms");
        let monotone = rep.norms.windows(2).all(|w| w[1] < w[0]);
        let scaled: Vec<f64> = rep.norms.iter().zip(&nus).map(|(n, &nu)| n * (nu as f64).sqrt()).collect();
        let bound = scaled[1] * 1.3;
        let sqrt_ok = !sqrt_law || scaled[1..].iter().all(|&s| s <= bound);
        let ok = monotone && sqrt_ok;
        o.passed &= ok;
        let shown: Vec<String> = rep.norms.iter().map(|v| format!("{v:.4}")).collect();
        o.details.push(format!(
            "{} {name} {}: [{}] monotone = {monotone}{}",
            if ok { "ok  " } else { "MISS" },
            rep.label,
            shown.join(", "),
            if sqrt_law {
                format!(", max sqrt(nu)*norm / value at nu=2 = {:.3}", scaled[1..].iter().cloned().fold(0.0, f64::max) / scaled[1])
            } else {
                String::new()
            }
        ));
    }
    if run.quick || run.top() < 4 {
        o.details.push("level-4 values not run".into());
        return o;
    }
    let n0 = smoothing_norm(&run.hierarchy, 4, lower(), 0, SMOOTHING_TOL).expect("norm").value;
    let n1 = smoothing_norm(&run.hierarchy, 4, lower(), 1, SMOOTHING_TOL).expect("norm").value;
    let ok0 = (n0 - 0.208).abs() <= 0.002;
    let ok1 = ((n1 - 0.0374) / 0.0374).abs() <= 0.05;
    o.passed &= ok0 && ok1;
    o.details.push(format!(
        "{} level 4 nu=0: {n0:.5} (expected 0.208 +- 0.002)",
        if ok0 { "ok  " } else { "MISS" }
    ));
    o.details.push(format!(
        "{} level 4 Pl(As,S) nu=1: {n1:.5} (expected 0.0374 +- 5%); ratio nu=1/nu=0 = {:.4} (reference 0.0374/0.208 = {:.4})",
        if ok1 { "ok  " } else { "MISS" },
        n1 / n0,
        0.0373526962 / 0.207996
    ));
    o
}

fn criterion_7() -> Outcome {
    let rep = verify_theorems(SEED, &DEFAULT_SIZES, DEFAULT_SYSTEMS).expect("theorems");
    use TheoremFamily::*;
    let required = [
        DiagonalBound,
        FactorizationBound,
        SymmetricBound,
        TriangularBound,
        Corollary,
        LemmaEstimates,
        SymmetricProduct,
        ArInverse,
        IterationLemma,
        BraessSarazin,
    ];
    let missing: Vec<_> = required.iter().filter(|f| rep.family(**f).next().is_none()).collect();
    let violations = rep.violations().count();
    let mut o = Outcome::new(
        violations == 0 && missing.is_empty(),
        format!(
            "{} checks on {} systems (sizes up to 40+20, nu <= 10), {violations} violations, missing families {missing:?}",
            rep.checks.len(),
            rep.systems
        ),
    );
    for s in rep.summary() {
        o.details.push(format!(
            "{:?}: {} checks, {} violations, min relative slack {:.3e}",
            s.family, s.checks, s.violations, s.min_relative_slack
        ));
    }
    o
}

fn criterion_8(run: &mut Run) -> Outcome {
    let level = if run.quick { 3.min(run.top()) } else { run.top() };
    let table = CostTable::new(lower(), 6);
    let sample = |run: &mut Run, spec: SmootherSpec, nu: usize| RateSample {
        spec,
        nu,
        smoothing_rate: None,
        mg_rate: Some(run.rate(spec, level, nu)),
    };
    let reference = sample(run, lower(), 6);
    let mut o = Outcome::new(true, format!("relative costs from level-{level} W-cycle rates, reference Pl(As,S) W(3,3)"));
    for (spec, nu, want) in [(lower(), 1, 1.467), (symmetric(), 4, 1.141)] {
        let s = sample(run, spec, nu);
        let c = relative_costs(&table, &s, &reference).expect("costs");
        let got = c.c_mg.unwrap_or(f64::NAN);
        let ok = (got - want).abs() <= 0.08;
        o.passed &= ok;
        o.details.push(format!(
            "{} {} nu={nu}: c_mg = {got:.3} (expected {want} +- 0.08; rate {:.4}, reference rate {:.4})",
            if ok { "ok  " } else { "MISS" },
            spec.label(),
            s.mg_rate.unwrap(),
            reference.mg_rate.unwrap()
        ));
    }
    o
}

fn criterion_9() -> Outcome {
    use rand::Rng;
    let mut worst_f = 0.0_f64;
    let mut worst_l = 0.0_f64;
    for (k, &(n, m)) in [(8, 4), (12, 6), (20, 10)].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let a = DenseMatrix::random_spd(n, 1.0, &mut rng);
        let b = DenseMatrix::random(m, n, &mut rng);
        let c = DenseMatrix::random_spd(m, 0.5, &mut rng).scale(0.1);
        let sys = SaddlePointSystem::from_dense(&a, &b, &c).unwrap();
        let schur = c.add(&b.matmul(&a.inverse().unwrap()).matmul(&b.transpose()));
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k_full = DenseMatrix::from_blocks(&a, &b.transpose(), &b, &c.scale(-1.0));
        let rhs: Vec<f64> = f.iter().chain(&g).copied().collect();
        let x = lu_solve(&k_full, &rhs).unwrap();
        let err = |u: &[f64], p: &[f64]| {
            u.iter().chain(p).zip(&x).fold(0.0_f64, |e, (a, b)| e.max((a - b).abs()))
        };
        for (class, steps) in [(SmootherClass::Factorization, 1), (SmootherClass::Lower, 2)] {
            let mut s = Smoother::with_dense_blocks(class, &sys, &a, &schur).unwrap();
            let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut p: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for _ in 0..steps {
                s.step(&mut u, &mut p, &f, &g);
            }
            let e = err(&u, &p);
            if class == SmootherClass::Factorization {
                worst_f = worst_f.max(e);
            } else {
                worst_l = worst_l.max(e);
            }
        }
    }
    Outcome::new(
        worst_f <= 1e-10 && worst_l <= 1e-10,
        format!("exact-block Pf one step: max error {worst_f:.2e}; exact-block Pl two steps: max error {worst_l:.2e}"),
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let quick = args.iter().any(|a| a == "--quick");
    let mut selected: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).filter(|n| (1..=9).contains(n)).collect();
    if selected.is_empty() {
        selected = (1..=9).collect();
    }
    let needs_mesh = selected.iter().any(|c| [2, 3, 4, 5, 6, 8].contains(c));
    let top = if !needs_mesh {
        0
    } else if quick || !selected.iter().any(|c| [3, 6, 8].contains(c)) {
        3
    } else {
        4
    };
    let t = Instant::now();
    let mut run = Run {
        hierarchy: Hierarchy::build(top).expect("hierarchy"),
        quick,
        rates: BTreeMap::new(),
    };
    if needs_mesh {
        eprintln!("hierarchy through level {top} built in {:.1} s", t.elapsed().as_secs_f64());
    }

    let mut failed = 0;
    for c in selected {
        let t = Instant::now();
        let o = match c {
            1 => criterion_1(),
            2 => criterion_2(&run),
            3 => criterion_3(&mut run),
            4 => criterion_4(&run),
            5 => criterion_5(&run),
            6 => criterion_6(&run),
            7 => criterion_7(),
            8 => criterion_8(&mut run),
            _ => criterion_9(),
        };
        failed += usize::from(!o.passed);
        println!(
            "{} criterion {c}: {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.summary,
            t.elapsed().as_secs_f64()
        );
        for d in &o.details {
            println!("      {d}");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
