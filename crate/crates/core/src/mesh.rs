//! Kuhn triangulations of the unit cube.
//!
//! Level ℓ splits the cube into n³ cells with n = 4·2^ℓ and each cell into
//! six tetrahedra that share the main diagonal. Vertices are numbered
//! lexicographically, `i + (n+1)(j + (n+1)k)`, so the numbering (and with it
//! the Gauss–Seidel order) is fixed by the grid.

use crate::error::{Error, Result};

/// The six orderings of the coordinate axes; each one walks from the cell's
/// lowest corner to its highest and defines one tetrahedron.
const AXIS_ORDERS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

#[derive(Debug, Clone)]
pub struct MeshLevel {
    pub level: usize,
    pub cells_per_dim: usize,
    pub vertices: Vec<[f64; 3]>,
    pub tetrahedra: Vec<[usize; 4]>,
    pub boundary_vertex_flags: Vec<bool>,
    /// min over elements of vol(T)^(1/3).
    pub h_min: f64,
}

impl MeshLevel {
    pub fn build(level: usize) -> Result<Self> {
        let too_large = || Error::LevelTooLarge { level };
        let n = 4usize.checked_mul(1usize.checked_shl(level as u32).ok_or_else(too_large)?).ok_or_else(too_large)?;
        let np = n + 1;
        let n_vertices = np.checked_mul(np).and_then(|v| v.checked_mul(np)).ok_or_else(too_large)?;
        let n_tets = n
            .checked_mul(n)
            .and_then(|v| v.checked_mul(n))
            .and_then(|v| v.checked_mul(6))
            .ok_or_else(too_large)?;
        // Refuse sizes that could not be allocated anyway.
        if n_tets > (isize::MAX as usize) / 32 {
            return Err(too_large());
        }

        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(n_vertices);
        let mut boundary = Vec::with_capacity(n_vertices);
        for k in 0..np {
            for j in 0..np {
                for i in 0..np {
                    vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                    boundary.push(i == 0 || j == 0 || k == 0 || i == n || j == n || k == n);
                }
            }
        }

        let idx = |c: [usize; 3]| c[0] + np * (c[1] + np * c[2]);
        let mut tetrahedra = Vec::with_capacity(n_tets);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for order in AXIS_ORDERS {
                        let mut c = [i, j, k];
                        let mut t = [idx(c), 0, 0, 0];
                        for (s, &axis) in order.iter().enumerate() {
                            c[axis] += 1;
                            t[s + 1] = idx(c);
                        }
                        // Odd permutations give negative orientation.
                        if grid_determinant(&order) < 0 {
                            t.swap(2, 3);
                        }
                        tetrahedra.push(t);
                    }
                }
            }
        }

        // Every Kuhn tetrahedron has volume h³/6, so h_T = 6^(-1/3)·h. Written
        // this way h_min halves exactly from one level to the next.
        let h_min = (1.0f64 / 6.0).cbrt() * h;
        Ok(Self {
            level,
            cells_per_dim: n,
            vertices,
            tetrahedra,
            boundary_vertex_flags: boundary,
            h_min,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tetrahedra(&self) -> usize {
        self.tetrahedra.len()
    }

    pub fn vertex_index(&self, i: usize, j: usize, k: usize) -> usize {
        let np = self.cells_per_dim + 1;
        i + np * (j + np * k)
    }

    pub fn grid_coords(&self, v: usize) -> [usize; 3] {
        let np = self.cells_per_dim + 1;
        [v % np, (v / np) % np, v / (np * np)]
    }

    pub fn signed_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tetrahedra[t].map(|v| self.vertices[v]);
        let e1 = sub3(b, a);
        let e2 = sub3(c, a);
        let e3 = sub3(d, a);
        det3(e1, e2, e3) / 6.0
    }

    /// h_T = vol(T)^(1/3).
    pub fn element_size(&self, t: usize) -> f64 {
        self.signed_volume(t).abs().cbrt()
    }

    /// Interior vertices in ascending vertex order.
    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| !self.boundary_vertex_flags[v]).collect()
    }
}

fn grid_determinant(order: &[usize; 3]) -> i32 {
    // Sign of the permutation: the edge vectors are unit vectors e_order[s].
    let inversions = (0..3)
        .flat_map(|a| (a + 1..3).map(move |b| (a, b)))
        .filter(|&(a, b)| order[a] > order[b])
        .count();
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<MeshLevel>,
}

/// Builds levels 0..=max_level.
pub fn build_hierarchy(max_level: usize) -> Result<MeshHierarchy> {
    let levels = (0..=max_level).map(MeshLevel::build).collect::<Result<_>>()?;
    Ok(MeshHierarchy { levels })
}
