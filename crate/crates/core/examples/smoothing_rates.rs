//! Smoothing norms ‖𝒜Mᵛ‖_{L×L} of the five Uzawa variants against the
//! η(ν) bound, on level 2.

use uzawa_mg::analysis::{eta, smoothing_rate_report, SMOOTHING_TOL};
use uzawa_mg::bench::{Variant, REFERENCE_OMEGA};
use uzawa_mg::Hierarchy;

fn main() -> uzawa_mg::Result<()> {
    let level = 2;
    let h = Hierarchy::build(level)?;
    let nus: Vec<usize> = (0..=8).collect();
    print!("{:<12}", "nu");
    for nu in &nus {
        print!("{nu:>9}");
    }
    println!();
    for v in Variant::comparison_set() {
        let spec = v.spec(REFERENCE_OMEGA, 1.0);
        let r = smoothing_rate_report(&h, level, spec, &nus, SMOOTHING_TOL)?;
        print!("{:<12}", r.label);
        for n in &r.norms {
            print!("{n:>9.4}");
        }
        println!();
    }
    print!("{:<12}", "eta");
    for &nu in &nus {
        print!("{:>9.4}", eta(nu));
    }
    println!();
    Ok(())
}
