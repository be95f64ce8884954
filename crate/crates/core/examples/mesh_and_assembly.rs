//! Builds the mesh hierarchy and prints the size of each saddle system.
//!
//! Run with `cargo run --release --example mesh_and_assembly -- 3`.

use uzawa_mg::Hierarchy;

fn main() -> uzawa_mg::Result<()> {
    let max_level: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let h = Hierarchy::build(max_level)?;
    println!("level  elements  velocity  pressure      dofs    h_min   nnz(A)");
    for l in 0..=max_level {
        let lv = h.level(l);
        let s = &lv.system;
        println!(
            "{l:>5}  {:>8}  {:>8}  {:>8}  {:>8}  {:.4}  {:>7}",
            lv.mesh.n_tetrahedra(),
            s.n_velocity_dofs(),
            s.n_pressure_dofs(),
            s.n_dofs(),
            lv.mesh.h_min,
            s.a.nnz(),
        );
    }
    // The stabilization block is what keeps P1-P1 stable: C must not vanish.
    let c = &h.level(max_level).system.c;
    let diag_sum: f64 = c.diagonal().iter().sum();
    println!("trace(C) on level {max_level}: {diag_sum:.4e}");
    Ok(())
}
