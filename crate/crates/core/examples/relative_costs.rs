//! Operation counts of the smoothers and the relative multigrid cost c^MG
//! against W(3,3) with P_ℓ(Â_s,Ŝ), from measured rates.

use uzawa_mg::analysis::{relative_costs, CostTable, RateSample};
use uzawa_mg::bench::{Variant, REFERENCE_OMEGA};
use uzawa_mg::multigrid::{asymptotic_rate, CycleSpec};
use uzawa_mg::{Hierarchy, SmootherSpec};

fn main() -> uzawa_mg::Result<()> {
    let level = 2;
    let h = Hierarchy::build(level)?;
    let reference_spec = SmootherSpec::lower(REFERENCE_OMEGA);
    let table = CostTable::new(reference_spec, 6);
    let rate = |spec, nu| -> uzawa_mg::Result<Option<f64>> {
        let r = asymptotic_rate(&h, &CycleSpec::w_cycle(nu), spec, level)?;
        Ok((!r.diverged).then_some(r.rate))
    };
    let reference = RateSample {
        spec: reference_spec,
        nu: 6,
        smoothing_rate: None,
        mg_rate: rate(reference_spec, 6)?,
    };
    for v in Variant::comparison_set() {
        let spec = v.spec(REFERENCE_OMEGA, 1.0);
        let step = table.step_cost(&spec)?;
        print!("{:<10} step {:>4}/{:<4}", spec.label(), step.first, step.subsequent);
        for nu in [1, 2, 4, 6] {
            let sample = RateSample {
                spec,
                nu,
                smoothing_rate: None,
                mg_rate: rate(spec, nu)?,
            };
            let c = relative_costs(&table, &sample, &reference)?;
            match c.c_mg {
                Some(x) => print!("  nu={nu}: {x:.3}"),
                None => print!("  nu={nu}: --"),
            }
        }
        println!();
    }
    Ok(())
}
