//! Mesh, assembly, transfer and norm checks against an independent dense
//! element loop.

use nalgebra::{DMatrix, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uzawa_mg::assembly::{assemble_full_stiffness, DofMap, PSPG_DELTA};
use uzawa_mg::transfer::build_transfer;
use uzawa_mg::{assemble_mass, assemble_system, build_hierarchy, Hierarchy, MeshLevel, NormOperator, SparseMatrix};

/// Gradients of the four barycentric functions and the volume, from the
/// inverse of the 4×4 matrix with rows (1, x, y, z).
fn p1_gradients(x: [[f64; 3]; 4]) -> (f64, [[f64; 3]; 4]) {
    let m = Matrix4::from_fn(|i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let vol = m.determinant().abs() / 6.0;
    let inv = m.try_inverse().unwrap();
    let mut g = [[0.0; 3]; 4];
    for (a, ga) in g.iter_mut().enumerate() {
        for d in 0..3 {
            ga[d] = inv[(d + 1, a)];
        }
    }
    (vol, g)
}

struct DenseForms {
    stiffness: DMatrix<f64>,
    mass: DMatrix<f64>,
    stab: DMatrix<f64>,
    /// div[d][(q, v)] = −∫ ∂_d φ_v ψ_q
    div: [DMatrix<f64>; 3],
}

fn dense_forms(mesh: &MeshLevel) -> DenseForms {
    let nv = mesh.n_vertices();
    let z = || DMatrix::zeros(nv, nv);
    let mut f = DenseForms {
        stiffness: z(),
        mass: z(),
        stab: z(),
        div: [z(), z(), z()],
    };
    for t in &mesh.tetrahedra {
        let (vol, g) = p1_gradients(t.map(|v| mesh.vertices[v]));
        let tau = PSPG_DELTA * vol.powf(2.0 / 3.0);
        for a in 0..4 {
            for b in 0..4 {
                let k = vol * (0..3).map(|d| g[a][d] * g[b][d]).sum::<f64>();
                f.stiffness[(t[a], t[b])] += k;
                f.stab[(t[a], t[b])] += tau * k;
                f.mass[(t[a], t[b])] += vol / 20.0 * if a == b { 2.0 } else { 1.0 };
                for d in 0..3 {
                    f.div[d][(t[a], t[b])] -= vol / 4.0 * g[b][d];
                }
            }
        }
    }
    f
}

fn max_entry_diff(s: &SparseMatrix, d: &DMatrix<f64>) -> f64 {
    let sd = s.to_dense();
    assert_eq!((sd.rows(), sd.cols()), d.shape());
    let mut m = 0.0_f64;
    for i in 0..sd.rows() {
        for j in 0..sd.cols() {
            m = m.max((sd[(i, j)] - d[(i, j)]).abs());
        }
    }
    m
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let d = x.iter().zip(y).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    d / y.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()))
}

#[test]
fn mesh_counts_and_volume() {
    let h = build_hierarchy(1).unwrap();
    assert_eq!(h.levels[0].n_tetrahedra(), 384);
    assert_eq!(h.levels[0].n_vertices(), 125);
    assert_eq!(h.levels[1].n_tetrahedra(), 3072);
    assert_eq!(h.levels[1].n_vertices(), 729);
    let m = &h.levels[0];
    let total: f64 = (0..m.n_tetrahedra()).map(|t| m.signed_volume(t)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!((0..m.n_tetrahedra()).all(|t| m.signed_volume(t) > 0.0));
    assert_eq!(h.levels[1].h_min, h.levels[0].h_min / 2.0);
}

#[test]
fn blocks_match_dense_element_loop() {
    let mesh = MeshLevel::build(0).unwrap();
    let sys = assemble_system(&mesh, None).unwrap();
    let (mv, mq) = assemble_mass(&mesh).unwrap();
    let f = dense_forms(&mesh);
    let dofs = DofMap::new(&mesh);
    let ni = dofs.n_interior();
    let int = &dofs.vertex_of_interior;

    let a = DMatrix::from_fn(3 * ni, 3 * ni, |i, j| {
        if i / ni == j / ni {
            f.stiffness[(int[i % ni], int[j % ni])]
        } else {
            0.0
        }
    });
    let b = DMatrix::from_fn(mesh.n_vertices(), 3 * ni, |q, j| f.div[j / ni][(q, int[j % ni])]);
    let mv_d = DMatrix::from_fn(ni, ni, |i, j| f.mass[(int[i], int[j])]);
    assert!(max_entry_diff(&sys.a, &a) < 1e-12);
    assert!(max_entry_diff(&sys.b, &b) < 1e-12);
    assert!(max_entry_diff(&sys.b_t, &b.transpose()) < 1e-12);
    assert!(max_entry_diff(&sys.c, &f.stab) < 1e-12);
    assert!(max_entry_diff(&mq, &f.mass) < 1e-15);
    assert!(max_entry_diff(&mv, &mv_d) < 1e-15);
    assert!(max_entry_diff(&assemble_full_stiffness(&mesh).unwrap(), &f.stiffness) < 1e-12);
}

#[test]
fn stiffness_annihilates_linear_functions_with_lift() {
    // For a global linear φ the interior rows of Kφ vanish, so
    // A_int φ_int = −K_int,bnd φ_bnd, the boundary-lift load.
    let mesh = MeshLevel::build(0).unwrap();
    let k = dense_forms(&mesh).stiffness;
    let sys = assemble_system(&mesh, None).unwrap();
    let dofs = DofMap::new(&mesh);
    let ni = dofs.n_interior();
    let phi: Vec<f64> = mesh.vertices.iter().map(|x| 0.3 + 2.0 * x[0] - x[1] + 0.5 * x[2]).collect();
    let phi_int: Vec<f64> = dofs.vertex_of_interior.iter().map(|&v| phi[v]).collect();
    let mut u = vec![0.0; 3 * ni];
    u[ni..2 * ni].copy_from_slice(&phi_int);
    let au = sys.a.spmv(&u).unwrap();
    for (i, &v) in dofs.vertex_of_interior.iter().enumerate() {
        let lift: f64 = (0..mesh.n_vertices())
            .filter(|&w| mesh.boundary_vertex_flags[w])
            .map(|w| -k[(v, w)] * phi[w])
            .sum();
        assert!((au[ni + i] - lift).abs() < 1e-12);
        assert_eq!(au[i], 0.0);
    }
}

#[test]
fn zero_forcing_and_constant_kernels() {
    let mesh = MeshLevel::build(1).unwrap();
    let sys = assemble_system(&mesh, None).unwrap();
    assert!(sys.f.iter().all(|&v| v == 0.0));
    assert!(sys.g.iter().all(|&v| v == 0.0));
    let ones = vec![1.0; sys.n_pressure_dofs()];
    let c1 = sys.c.spmv(&ones).unwrap();
    let bt1 = sys.b_t.spmv(&ones).unwrap();
    assert!(c1.iter().all(|v| v.abs() < 1e-12));
    assert!(bt1.iter().all(|v| v.abs() < 1e-12));
    assert_eq!(sys.b_t.to_dense(), sys.b.to_dense().transpose());
}

#[test]
fn mass_matrix_is_spd_with_unit_total() {
    let mesh = MeshLevel::build(0).unwrap();
    let (_, mq) = assemble_mass(&mesh).unwrap();
    let ones = vec![1.0; mq.n_rows()];
    let total: f64 = mq.spmv(&ones).unwrap().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let min_rq = (0..50)
        .map(|_| {
            let x = random_vec(mq.n_rows(), &mut rng);
            let mx = mq.spmv(&x).unwrap();
            x.iter().zip(&mx).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|v| v * v).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(min_rq > 0.0);
}

#[test]
fn nested_galerkin_consistency() {
    let h = Hierarchy::build(1).unwrap();
    let (c, f) = (h.level(0), h.level(1));
    let t = f.transfer.as_ref().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let nu_c = c.system.n_velocity_dofs();
    let np_c = c.system.n_pressure_dofs();
    for _ in 0..3 {
        let v = random_vec(nu_c, &mut rng);
        let q = random_vec(np_c, &mut rng);
        // Pᵥᵀ A_f Pᵥ v = A_c v
        let galerkin = t.velocity.spmv_transpose(&f.system.a.spmv(&t.velocity.spmv(&v).unwrap()).unwrap()).unwrap();
        assert!(rel_diff(&galerkin, &c.system.a.spmv(&v).unwrap()) < 1e-11);
        // P_qᵀ B_f Pᵥ v = B_c v
        let bp = t.pressure.spmv_transpose(&f.system.b.spmv(&t.velocity.spmv(&v).unwrap()).unwrap()).unwrap();
        assert!(rel_diff(&bp, &c.system.b.spmv(&v).unwrap()) < 1e-11);
        // P_qᵀ M_f P_q q = M_c q
        let mq = t.pressure.spmv_transpose(&f.norm.mq.spmv(&t.pressure.spmv(&q).unwrap()).unwrap()).unwrap();
        assert!(rel_diff(&mq, &c.norm.mq.spmv(&q).unwrap()) < 1e-11);
    }
}

#[test]
fn transfer_reproduces_linears_and_constants() {
    let h = build_hierarchy(1).unwrap();
    let t = build_transfer(&h.levels[0], &h.levels[1]).unwrap();
    let lin = |m: &MeshLevel| m.vertices.iter().map(|x| x[0]).collect::<Vec<f64>>();
    let fine = t.pressure.spmv(&lin(&h.levels[0])).unwrap();
    assert!(rel_diff(&fine, &lin(&h.levels[1])) < 1e-15);
    let ones = t.pressure.spmv(&vec![1.0; 125]).unwrap();
    assert!(ones.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    assert!(build_transfer(&h.levels[1], &h.levels[0]).is_err());
}

#[test]
fn norm_operator_identities() {
    let mesh = MeshLevel::build(0).unwrap();
    let (mv, mq) = assemble_mass(&mesh).unwrap();
    let mq_dense = dense_forms(&mesh).mass;
    let norm = NormOperator::new(mv, mq, mesh.h_min);
    let n = norm.n_dofs();
    let nu = norm.n_velocity_dofs();
    assert_eq!(norm.value(&vec![0.0; n]).unwrap(), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = vec![0.0; n];
    let q = random_vec(n - nu, &mut rng);
    x[nu..].copy_from_slice(&q);
    let qv = nalgebra::DVector::from_column_slice(&q);
    let oracle = (qv.transpose() * &mq_dense * &qv)[(0, 0)];
    assert!((norm.value(&x).unwrap().powi(2) - oracle).abs() < 1e-12);

    for lumped in [false, true] {
        let l = norm.clone().with_lumping(lumped);
        let x = random_vec(n, &mut rng);
        let lx = l.apply(&x).unwrap();
        let v = l.value(&x).unwrap();
        assert!((l.dual_value(&lx).unwrap() - v).abs() < 1e-8 * v, "lumped = {lumped}");
    }

    // Velocity part carries the h⁻² scaling.
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    let expect = norm.mv.get(0, 0) / (mesh.h_min * mesh.h_min);
    assert!((norm.value(&x).unwrap().powi(2) - expect).abs() < 1e-12 * expect);
}

#[test]
fn pressure_mean_projection() {
    let h = Hierarchy::build(0).unwrap();
    let norm = &h.level(0).norm;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut p: Vec<f64> = (0..norm.n_pressure_dofs()).map(|_| rng.gen::<f64>()).collect();
    norm.project_mean(&mut p);
    assert!(norm.pressure_mean(&p).abs() < 1e-15);
}
