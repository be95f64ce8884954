//! Estimates the damping ω of Ŝ = ω⁻¹ diag M_q on each level and checks the
//! smoother conditions with it.

use uzawa_mg::smoother::{compute_omega, validate_conditions, OMEGA_TOL};
use uzawa_mg::{Hierarchy, Smoother, SmootherSpec};

fn main() -> uzawa_mg::Result<()> {
    let h = Hierarchy::build(2)?;
    for level in 0..=2 {
        let est = compute_omega(&h, level, OMEGA_TOL, 1)?;
        println!(
            "level {level}: lambda_max = {:.6}, omega = {:.5} ({} power iterations, converged = {})",
            est.lambda_max, est.omega, est.iterations, est.converged
        );
    }

    let lv = h.level(0);
    let omega = compute_omega(&h, 0, OMEGA_TOL, 1)?.omega;
    for w in [omega, 2.0 * omega] {
        let s = Smoother::new(SmootherSpec::lower(w), &lv.system, &lv.norm.mq.diagonal())?;
        let report = validate_conditions(&s, 7)?;
        println!("omega = {w:.5}: {report:?}");
    }
    Ok(())
}
