//! Multigrid solves to a relative residual of 1e-8: W-cycles with the three
//! pressure approximations, and the V-cycle that needs enough smoothing.

use uzawa_mg::multigrid::{CycleSpec, MultigridSolver};
use uzawa_mg::smoother::{SHatKind, OMEGA_GS_C, OMEGA_SYMGS_C};
use uzawa_mg::{Hierarchy, SmootherSpec};

fn main() -> uzawa_mg::Result<()> {
    let level = 2;
    let h = Hierarchy::build(level)?;
    let base = SmootherSpec::lower(0.55849);
    let specs = [
        base,
        base.with_s_hat(SHatKind::DampedSymgsC, OMEGA_SYMGS_C),
        base.with_s_hat(SHatKind::DampedGsC, OMEGA_GS_C),
    ];
    for cycle in [CycleSpec::w_cycle as fn(usize) -> CycleSpec, CycleSpec::v_cycle] {
        for spec in specs {
            for nu in [2, 4, 8] {
                let c = cycle(nu);
                let name = c.name();
                let r = MultigridSolver::new(&h, c, spec, level)?.solve(None)?;
                let status = if r.converged { "converged" } else if r.diverged { "diverged" } else { "stalled" };
                println!("{:<11} {name:<7} {:>3} iterations, {status}, mean rate {:.3}", spec.label(), r.iterations, r.final_rate);
            }
        }
    }
    Ok(())
}
