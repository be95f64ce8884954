//! Asymptotic W-cycle convergence rates, measured on the homogeneous
//! problem from a random start.

use uzawa_mg::multigrid::{asymptotic_rate, CycleSpec};
use uzawa_mg::{Hierarchy, SmootherSpec};

fn main() -> uzawa_mg::Result<()> {
    let level = 2;
    let h = Hierarchy::build(level)?;
    let omega = 0.55849;
    for spec in [SmootherSpec::lower(omega), SmootherSpec::symmetric(omega)] {
        print!("{:<10}", spec.label());
        for nu in [1, 2, 4, 6, 8] {
            let r = asymptotic_rate(&h, &CycleSpec::w_cycle(nu), spec, level)?;
            print!("  nu={nu}: {:.3}", r.rate);
        }
        println!();
    }
    Ok(())
}
