//! P1–P1 Stokes assembly with PSPG stabilization.
//!
//! Velocity unknowns live on interior vertices only (homogeneous Dirichlet
//! data is eliminated) and are blocked by component: DoF `d·n_int + i` is
//! component `d` at the `i`-th interior vertex. Pressure uses every vertex.

use crate::dense::DenseMatrix;
use crate::error::{check_len, Error, Result};
use crate::mesh::{det3, sub3, MeshLevel};
use crate::sparse::SparseMatrix;

/// Stabilization weight δ_T.
pub const PSPG_DELTA: f64 = 1.0 / 12.0;

/// Relative tolerance used to drop cancellation residue after assembly.
const PRUNE_TOL: f64 = 1e-12;

/// The blocks of [[A, Bᵀ], [B, −C]] and the load vectors.
#[derive(Debug, Clone)]
pub struct SaddlePointSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub b_t: SparseMatrix,
    pub c: SparseMatrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl SaddlePointSystem {
    /// Checks block shapes and stores Bᵀ explicitly.
    pub fn new(a: SparseMatrix, b: SparseMatrix, c: SparseMatrix, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let n = a.n_rows();
        let m = c.n_rows();
        check_len("A columns", n, a.n_cols())?;
        check_len("C columns", m, c.n_cols())?;
        check_len("B rows", m, b.n_rows())?;
        check_len("B columns", n, b.n_cols())?;
        check_len("f", n, f.len())?;
        check_len("g", m, g.len())?;
        let b_t = b.transpose();
        Ok(Self { a, b, b_t, c, f, g })
    }

    /// Builds a system from dense blocks with zero loads.
    pub fn from_dense(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<Self> {
        Self::new(
            SparseMatrix::from_dense(a),
            SparseMatrix::from_dense(b),
            SparseMatrix::from_dense(c),
            vec![0.0; a.rows()],
            vec![0.0; c.rows()],
        )
    }

    pub fn n_velocity_dofs(&self) -> usize {
        self.a.n_rows()
    }

    pub fn n_pressure_dofs(&self) -> usize {
        self.c.n_rows()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_velocity_dofs() + self.n_pressure_dofs()
    }

    /// (Au + Bᵀp, Bu − Cp)
    pub fn apply(&self, u: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut yu = vec![0.0; self.n_velocity_dofs()];
        let mut yp = vec![0.0; self.n_pressure_dofs()];
        self.apply_into(u, p, &mut yu, &mut yp);
        (yu, yp)
    }

    pub fn apply_into(&self, u: &[f64], p: &[f64], yu: &mut [f64], yp: &mut [f64]) {
        self.a.mul_into(u, yu);
        self.b_t.mul_add(1.0, p, yu);
        self.b.mul_into(u, yp);
        self.c.mul_add(-1.0, p, yp);
    }

    /// ru = f − Au − Bᵀp, rp = g − Bu + Cp.
    pub fn residual_into(&self, u: &[f64], p: &[f64], f: &[f64], g: &[f64], ru: &mut [f64], rp: &mut [f64]) {
        self.apply_into(u, p, ru, rp);
        for (r, fi) in ru.iter_mut().zip(f) {
            *r = fi - *r;
        }
        for (r, gi) in rp.iter_mut().zip(g) {
            *r = gi - *r;
        }
    }

    /// The full operator as a dense matrix (small systems only).
    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_blocks(
            &self.a.to_dense(),
            &self.b_t.to_dense(),
            &self.b.to_dense(),
            &self.c.to_dense().scale(-1.0),
        )
    }
}

/// Vertex ↔ interior-vertex numbering of one mesh.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub interior_of_vertex: Vec<Option<usize>>,
    pub vertex_of_interior: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &MeshLevel) -> Self {
        let mut interior_of_vertex = vec![None; mesh.n_vertices()];
        let mut vertex_of_interior = Vec::new();
        for v in 0..mesh.n_vertices() {
            if !mesh.boundary_vertex_flags[v] {
                interior_of_vertex[v] = Some(vertex_of_interior.len());
                vertex_of_interior.push(v);
            }
        }
        Self {
            interior_of_vertex,
            vertex_of_interior,
        }
    }

    pub fn n_interior(&self) -> usize {
        self.vertex_of_interior.len()
    }

    pub fn n_velocity_dofs(&self) -> usize {
        3 * self.n_interior()
    }
}

/// Volume and the four constant basis-function gradients of a tetrahedron.
pub fn tet_geometry(x: [[f64; 3]; 4]) -> (f64, [[f64; 3]; 4]) {
    let e1 = sub3(x[1], x[0]);
    let e2 = sub3(x[2], x[0]);
    let e3 = sub3(x[3], x[0]);
    let det = det3(e1, e2, e3);
    let r1 = cross(e2, e3).map(|v| v / det);
    let r2 = cross(e3, e1).map(|v| v / det);
    let r3 = cross(e1, e2).map(|v| v / det);
    let r0 = [-(r1[0] + r2[0] + r3[0]), -(r1[1] + r2[1] + r3[1]), -(r1[2] + r2[2] + r3[2])];
    (det / 6.0, [r0, r1, r2, r3])
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Element mass matrix vol/20·(1 + δ_ij).
pub fn element_mass(vol: f64) -> [[f64; 4]; 4] {
    let mut m = [[vol / 20.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = vol / 10.0;
    }
    m
}

/// Vertex-to-vertex sparsity pattern with one value array per scalar form.
struct ScalarForms {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    stiffness: Vec<f64>,
    mass: Vec<f64>,
    stab: Vec<f64>,
    div: [Vec<f64>; 3],
}

impl ScalarForms {
    fn pattern(mesh: &MeshLevel) -> Self {
        let nv = mesh.n_vertices();
        let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(15); nv];
        for t in &mesh.tetrahedra {
            for &a in t {
                for &b in t {
                    if !adj[a].contains(&b) {
                        adj[a].push(b);
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(nv + 1);
        offsets.push(0);
        let mut cols = Vec::new();
        for row in &mut adj {
            row.sort_unstable();
            cols.extend_from_slice(row);
            offsets.push(cols.len());
        }
        let nnz = cols.len();
        Self {
            offsets,
            cols,
            stiffness: vec![0.0; nnz],
            mass: vec![0.0; nnz],
            stab: vec![0.0; nnz],
            div: [vec![0.0; nnz], vec![0.0; nnz], vec![0.0; nnz]],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let r = self.offsets[i]..self.offsets[i + 1];
        r.start + self.cols[r].binary_search(&j).expect("pattern covers element couplings")
    }

    /// Gathers scalar forms into a CSR matrix. `row_map` sends a vertex to
    /// its row (None drops it). Each column block is (column offset, vertex
    /// to column map, values); blocks are laid side by side in order.
    fn extract(
        &self,
        n_rows: usize,
        n_cols: usize,
        row_map: &dyn Fn(usize) -> Option<usize>,
        col_blocks: &[(usize, &dyn Fn(usize) -> Option<usize>, &[f64])],
    ) -> SparseMatrix {
        let nv = self.offsets.len() - 1;
        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut rows: Vec<(usize, usize)> = (0..nv).filter_map(|v| row_map(v).map(|r| (r, v))).collect();
        rows.sort_unstable();
        let mut col_indices = Vec::new();
        let mut vals = Vec::new();
        let mut next_row = 0;
        for (r, v) in rows {
            while next_row < r {
                next_row += 1;
                row_offsets[next_row] = vals.len();
            }
            for &(shift, cmap, cvals) in col_blocks {
                for k in self.offsets[v]..self.offsets[v + 1] {
                    if let Some(c) = cmap(self.cols[k]) {
                        if cvals[k] != 0.0 {
                            col_indices.push(shift + c);
                            vals.push(cvals[k]);
                        }
                    }
                }
            }
            next_row = r + 1;
            row_offsets[next_row] = vals.len();
        }
        while next_row < n_rows {
            next_row += 1;
            row_offsets[next_row] = vals.len();
        }
        let mut m = SparseMatrix::new(n_rows, n_cols, row_offsets, col_indices, vals)
            .expect("assembled pattern is canonical");
        m.prune(PRUNE_TOL);
        m
    }
}

/// Body force as a function of position.
pub type Forcing<'a> = &'a dyn Fn([f64; 3]) -> [f64; 3];

fn assemble_forms(mesh: &MeshLevel, forcing: Option<Forcing>) -> Result<(ScalarForms, Vec<[f64; 3]>, Vec<f64>)> {
    let mut forms = ScalarForms::pattern(mesh);
    let nv = mesh.n_vertices();
    // Nodal load per vertex and component, and the stabilized pressure load.
    let mut load = vec![[0.0; 3]; nv];
    let mut g = vec![0.0; nv];
    for (ti, t) in mesh.tetrahedra.iter().enumerate() {
        let x = t.map(|v| mesh.vertices[v]);
        let (vol, grads) = tet_geometry(x);
        if vol < 1e-14 {
            return Err(Error::DegenerateElement { index: ti, volume: vol });
        }
        let h_t = vol.cbrt();
        let tau = PSPG_DELTA * h_t * h_t;
        let mass = element_mass(vol);
        for a in 0..4 {
            for b in 0..4 {
                let s = forms.slot(t[a], t[b]);
                let kab = vol * dot3(grads[a], grads[b]);
                forms.stiffness[s] += kab;
                forms.mass[s] += mass[a][b];
                forms.stab[s] += tau * kab;
                for d in 0..3 {
                    forms.div[d][s] -= vol / 4.0 * grads[b][d];
                }
            }
        }
        if let Some(fun) = forcing {
            // Interpolate f and integrate with the element mass matrix: exact
            // for linear loads. The gradient term needs only the mean of f.
            let fv = x.map(fun);
            let mut mean = [0.0; 3];
            for a in 0..4 {
                for d in 0..3 {
                    mean[d] += fv[a][d] / 4.0;
                    for b in 0..4 {
                        load[t[a]][d] += mass[a][b] * fv[b][d];
                    }
                }
            }
            for a in 0..4 {
                g[t[a]] -= tau * vol * dot3(mean, grads[a]);
            }
        }
    }
    Ok((forms, load, g))
}

/// Assembles A, B, C and the loads on one level. `forcing = None` means f ≡ 0.
pub fn assemble_system(mesh: &MeshLevel, forcing: Option<Forcing>) -> Result<SaddlePointSystem> {
    let (forms, load, g) = assemble_forms(mesh, forcing)?;
    let dofs = DofMap::new(mesh);
    let ni = dofs.n_interior();
    let nv = mesh.n_vertices();
    let int = |v: usize| dofs.interior_of_vertex[v];
    let all = |v: usize| Some(v);

    let k_int = forms.extract(ni, ni, &int, &[(0, &int, &forms.stiffness)]);
    let a = block_diag3(&k_int);
    let b = forms.extract(
        nv,
        3 * ni,
        &all,
        &[(0, &int, &forms.div[0]), (ni, &int, &forms.div[1]), (2 * ni, &int, &forms.div[2])],
    );
    let c = forms.extract(nv, nv, &all, &[(0, &all, &forms.stab)]);

    let mut f = vec![0.0; 3 * ni];
    for (i, &v) in dofs.vertex_of_interior.iter().enumerate() {
        for d in 0..3 {
            f[d * ni + i] = load[v][d];
        }
    }
    SaddlePointSystem::new(a, b, c, f, g)
}

/// Consistent P1 mass matrices: (velocity, one component on interior
/// vertices; pressure, all vertices).
pub fn assemble_mass(mesh: &MeshLevel) -> Result<(SparseMatrix, SparseMatrix)> {
    let (forms, _, _) = assemble_forms(mesh, None)?;
    let dofs = DofMap::new(mesh);
    let ni = dofs.n_interior();
    let nv = mesh.n_vertices();
    let int = |v: usize| dofs.interior_of_vertex[v];
    let all = |v: usize| Some(v);
    let mv = forms.extract(ni, ni, &int, &[(0, &int, &forms.mass)]);
    let mq = forms.extract(nv, nv, &all, &[(0, &all, &forms.mass)]);
    Ok((mv, mq))
}

/// Global P1 stiffness on all vertices (no boundary elimination).
pub fn assemble_full_stiffness(mesh: &MeshLevel) -> Result<SparseMatrix> {
    let (forms, _, _) = assemble_forms(mesh, None)?;
    let nv = mesh.n_vertices();
    let all = |v: usize| Some(v);
    Ok(forms.extract(nv, nv, &all, &[(0, &all, &forms.stiffness)]))
}

/// blockdiag(K, K, K)
fn block_diag3(k: &SparseMatrix) -> SparseMatrix {
    let n = k.n_rows();
    let mut offsets = Vec::with_capacity(3 * n + 1);
    let mut cols = Vec::with_capacity(3 * k.nnz());
    let mut vals = Vec::with_capacity(3 * k.nnz());
    offsets.push(0);
    for d in 0..3 {
        for i in 0..n {
            let (c, v) = k.row(i);
            cols.extend(c.iter().map(|&j| d * n + j));
            vals.extend_from_slice(v);
            offsets.push(vals.len());
        }
    }
    SparseMatrix::new(3 * n, 3 * n, offsets, cols, vals).expect("block diagonal of a canonical matrix is canonical")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::norm_inf;

    #[test]
    fn level0_shapes() {
        let mesh = MeshLevel::build(0).unwrap();
        let s = assemble_system(&mesh, None).unwrap();
        assert_eq!(s.n_velocity_dofs(), 81);
        assert_eq!(s.n_pressure_dofs(), 125);
        assert!(s.f.iter().all(|&v| v == 0.0));
        assert!(s.g.iter().all(|&v| v == 0.0));
        assert_eq!(s.b_t, s.b.transpose());
    }

    #[test]
    fn constants_are_in_the_kernels() {
        let mesh = MeshLevel::build(1).unwrap();
        let s = assemble_system(&mesh, None).unwrap();
        let ones = vec![1.0; s.n_pressure_dofs()];
        assert!(norm_inf(&s.c.spmv(&ones).unwrap()) < 1e-12);
        assert!(norm_inf(&s.b_t.spmv(&ones).unwrap()) < 1e-12);
    }

    #[test]
    fn kuhn_stiffness_is_seven_point() {
        let mesh = MeshLevel::build(1).unwrap();
        let s = assemble_system(&mesh, None).unwrap();
        let h = 1.0 / mesh.cells_per_dim as f64;
        // Interior vertex far from the boundary.
        let dofs = DofMap::new(&mesh);
        let v = mesh.vertex_index(4, 4, 4);
        let i = dofs.interior_of_vertex[v].unwrap();
        let (cols, vals) = s.a.row(i);
        assert_eq!(cols.len(), 7);
        let diag = s.a.get(i, i);
        assert!((diag - 6.0 * h).abs() < 1e-14);
        assert!(vals.iter().filter(|&&x| x != diag).all(|&x| (x + h).abs() < 1e-14));
    }

    #[test]
    fn mass_totals() {
        let mesh = MeshLevel::build(0).unwrap();
        let (_, mq) = assemble_mass(&mesh).unwrap();
        let total: f64 = mq.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn element_mass_formula() {
        let m = element_mass(0.6);
        assert_eq!(m[0][0], 0.06);
        assert_eq!(m[1][2], 0.03);
    }
}
