//! Nodal interpolation between nested Kuhn meshes.
//!
//! A fine vertex with grid index I either coincides with the coarse vertex
//! I/2 (all coordinates even) or is the midpoint of the coarse edge from
//! ⌊I/2⌋ to ⌈I/2⌉. That segment is always an edge of the coarse Kuhn
//! triangulation, so interpolation only ever averages two values.

use crate::assembly::DofMap;
use crate::error::{Error, Result};
use crate::mesh::MeshLevel;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone)]
pub struct TransferOperator {
    /// Fine velocity DoFs × coarse velocity DoFs (component blocked).
    pub velocity: SparseMatrix,
    /// Fine vertices × coarse vertices.
    pub pressure: SparseMatrix,
}

pub fn build_transfer(coarse: &MeshLevel, fine: &MeshLevel) -> Result<TransferOperator> {
    if fine.cells_per_dim != 2 * coarse.cells_per_dim {
        return Err(Error::LevelMismatch(format!(
            "fine mesh has {} cells per direction, coarse has {}",
            fine.cells_per_dim, coarse.cells_per_dim
        )));
    }
    let fine_dofs = DofMap::new(fine);
    let coarse_dofs = DofMap::new(coarse);

    let mut p_trip = Vec::with_capacity(2 * fine.n_vertices());
    let mut v_trip = Vec::with_capacity(6 * fine_dofs.n_velocity_dofs());
    let (nfi, nci) = (fine_dofs.n_interior(), coarse_dofs.n_interior());
    for v in 0..fine.n_vertices() {
        let c = fine.grid_coords(v);
        let lo = coarse.vertex_index(c[0] / 2, c[1] / 2, c[2] / 2);
        let hi = coarse.vertex_index(c[0].div_ceil(2), c[1].div_ceil(2), c[2].div_ceil(2));
        let parents: Vec<(usize, f64)> = if lo == hi { vec![(lo, 1.0)] } else { vec![(lo, 0.5), (hi, 0.5)] };
        for &(cv, w) in &parents {
            p_trip.push((v, cv, w));
        }
        if let Some(fi) = fine_dofs.interior_of_vertex[v] {
            for &(cv, w) in &parents {
                // Boundary parents carry the zero Dirichlet value.
                if let Some(ci) = coarse_dofs.interior_of_vertex[cv] {
                    for d in 0..3 {
                        v_trip.push((d * nfi + fi, d * nci + ci, w));
                    }
                }
            }
        }
    }
    Ok(TransferOperator {
        velocity: SparseMatrix::from_triplets(3 * nfi, 3 * nci, &v_trip),
        pressure: SparseMatrix::from_triplets(fine.n_vertices(), coarse.n_vertices(), &p_trip),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_functions() {
        let c = MeshLevel::build(0).unwrap();
        let f = MeshLevel::build(1).unwrap();
        let t = build_transfer(&c, &f).unwrap();
        let lin = |x: [f64; 3]| 2.0 * x[0] - x[1] + 0.5 * x[2] + 1.0;
        let coarse: Vec<f64> = c.vertices.iter().map(|&x| lin(x)).collect();
        let fine = t.pressure.spmv(&coarse).unwrap();
        for (v, &x) in f.vertices.iter().enumerate() {
            assert!((fine[v] - lin(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn row_structure() {
        let c = MeshLevel::build(0).unwrap();
        let f = MeshLevel::build(1).unwrap();
        let t = build_transfer(&c, &f).unwrap();
        for i in 0..t.pressure.n_rows() {
            let (cols, vals) = t.pressure.row(i);
            assert!(cols.len() <= 2);
            assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        for i in 0..t.velocity.n_rows() {
            let (cols, vals) = t.velocity.row(i);
            assert!(cols.len() <= 2);
            assert!(vals.iter().all(|&w| w == 1.0 || w == 0.5));
        }
    }

    #[test]
    fn mismatched_levels() {
        let c = MeshLevel::build(0).unwrap();
        let f = MeshLevel::build(2).unwrap();
        assert!(matches!(build_transfer(&c, &f), Err(Error::LevelMismatch(_))));
    }
}
