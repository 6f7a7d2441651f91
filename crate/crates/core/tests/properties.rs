mod common;

use common::*;
use proptest::prelude::*;
use q2q1_amg::coarsen::{
    filter_matrix, find_coarse_pressures, form_aux_blocks, pressure_pattern, split_pressures, velocity_pattern_scalar,
    CoarsenParams, Lumping,
};
use q2q1_amg::diagnostics::{build_mac1d, infsup_estimate, projected_mac_schur, second_eigenvector, sign_changes, VelocityPlacement};
use q2q1_amg::emin::{emin_iterate_with_history, energy, initial_prolongator, EminNorm, EminProblem};
use q2q1_amg::fem::{
    assemble_mass_matrices, divergence_matrix, interpolate_velocity, stiffness_matrix, stokes_problem, ProblemSpec,
};
use q2q1_amg::graph::{bfs_distances, Graph};
use q2q1_amg::hierarchy::{setup_hierarchy, HierarchyParams};
use q2q1_amg::krylov::GmresParams;
use q2q1_amg::smoothers::{Smoother, SmootherKind};
use q2q1_amg::sparse::triple_product;
use q2q1_amg::SparseMatrix;
use rand::{Rng, SeedableRng};

fn sparse_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = SparseMatrix> {
    (1..=max_rows, 1..=max_cols, 0.05f64..0.6, any::<u64>()).prop_map(|(r, c, density, seed)| random_sparse(r, c, density, seed))
}

fn random_sparse(r: usize, c: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..r {
        for j in 0..c {
            if rng.gen_bool(density) {
                t.push((i, j, rng.gen_range(-10.0..10.0)));
            }
        }
    }
    SparseMatrix::from_triplets(r, c, &t).unwrap()
}

fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

fn floyd_warshall(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n_vertices();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for &j in g.neighbors(i) {
            d[i][j] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn relative_symmetry_defect(a: &SparseMatrix) -> f64 {
    let d = a.add(1.0, &a.transpose(), -1.0).unwrap();
    d.max_abs() / a.max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_products_match_dense_oracle(
        a in sparse_strategy(50, 50),
        cols in 1usize..50,
        seed in any::<u64>(),
    ) {
        let b = random_sparse(a.n_cols(), cols, 0.3, seed);
        let want = dense_matmul(&dense(&a), &dense(&b));
        prop_assert!(relative_gap(&a.matmul(&b).unwrap(), &want) <= 1e-13);
    }

    #[test]
    fn triple_product_matches_dense_oracle(a in sparse_strategy(30, 30), seed in any::<u64>()) {
        let n = a.n_rows();
        let a = random_sparse(n, n, 0.3, seed);
        let p = random_sparse(n, 1 + (seed as usize % n.max(1)), 0.4, seed ^ 0x9e37);
        let r = p.transpose();
        let want = dense_matmul(&dense_matmul(&dense(&r), &dense(&a)), &dense(&p));
        prop_assert!(relative_gap(&triple_product(&r, &a, &p).unwrap(), &want) <= 1e-13);
    }

    #[test]
    fn matrix_vector_products_match_dense_oracle(a in sparse_strategy(50, 50), seed in any::<u64>()) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let x: Vec<f64> = (0..a.n_cols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = dense(&a);
        let want: Vec<f64> = d.iter().map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        let got = a.mul_vec(&x);
        let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-13 * scale);
        }
        let y: Vec<f64> = (0..a.n_rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let want_t: Vec<f64> = (0..a.n_cols()).map(|j| (0..a.n_rows()).map(|i| d[i][j] * y[i]).sum()).collect();
        let scale = want_t.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (g, w) in a.mul_vec_transpose(&y).iter().zip(&want_t) {
            prop_assert!((g - w).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn sparse_sum_matches_dense_oracle(a in sparse_strategy(50, 50), seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let b = random_sparse(a.n_rows(), a.n_cols(), 0.3, seed);
        let (da, db) = (dense(&a), dense(&b));
        let want: Vec<Vec<f64>> = da.iter().zip(&db)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| alpha * x + beta * y).collect())
            .collect();
        prop_assert!(relative_gap(&a.add(alpha, &b, beta).unwrap(), &want) <= 1e-13);
    }

    #[test]
    fn transpose_is_an_involution(a in sparse_strategy(50, 50)) {
        prop_assert_eq!(a.transpose().transpose(), a.clone());
        let t = dense(&a.transpose());
        let d = dense(&a);
        for i in 0..a.n_rows() {
            for j in 0..a.n_cols() {
                prop_assert_eq!(t[j][i], d[i][j]);
            }
        }
    }

    #[test]
    fn bfs_matches_all_pairs_shortest_paths(n in 1usize..=30, p in 0.02f64..0.5, seed in any::<u64>(), max_dist in 0usize..8) {
        let g = random_graph(n, p, seed);
        let all = floyd_warshall(&g);
        for s in 0..n {
            let mut got = bfs_distances(&g, s, max_dist).unwrap();
            got.sort_unstable();
            let want: Vec<(usize, usize)> = (0..n).filter(|&v| all[s][v] <= max_dist).map(|v| (v, all[s][v])).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn splitting_invariants_hold_on_random_graphs(n in 1usize..=80, p in 0.02f64..0.3, seed in any::<u64>()) {
        let g = random_graph(n, p, seed);
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let r = verify_pressure_graph(&g, &coords, &CoarsenParams::default());
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn filtering_preserves_row_sums(a in sparse_strategy(40, 40), tau in 0.0f64..0.5) {
        let n = a.n_rows();
        let sq = random_sparse(n, n, 0.3, a.nnz() as u64);
        let z = sq.matmul(&sq.transpose()).unwrap().add(1.0, &SparseMatrix::identity(n), 1.0).unwrap();
        let f = filter_matrix(&z, tau, Lumping::PreserveRowSums);
        for (x, y) in f.row_sums().iter().zip(z.row_sums()) {
            prop_assert!((x - y).abs() <= 1e-12 * z.max_abs());
        }
        let f0 = filter_matrix(&z, tau, Lumping::ZeroRowSums);
        for s in f0.row_sums() {
            prop_assert!(s.abs() <= 1e-12 * z.max_abs());
        }
    }
}

#[test]
fn splitting_invariants_hold_on_generated_pressure_graphs() {
    let params = CoarsenParams::default();
    let mut specs: Vec<ProblemSpec> = (1..=16).map(ProblemSpec::lid_cavity).collect();
    specs.extend([ProblemSpec::backward_step(4, 1.0, 5.0), ProblemSpec::obstacle(8, 1.0)]);
    for spec in &specs {
        let (g, coords) = pressure_graph(spec, &params);
        verify_pressure_graph(&g, &coords, &params).unwrap_or_else(|e| panic!("{:?}: {e}", spec.domain));
    }
}

#[test]
fn coarse_sets_are_deterministic() {
    let sys = cavity(16);
    let (mesh, _) = stokes_problem(&ProblemSpec::lid_cavity(16)).unwrap();
    let params = CoarsenParams::default();
    let a = form_aux_blocks(&sys.a, &sys.b, &params).unwrap();
    let b = form_aux_blocks(&sys.a, &sys.b, &params).unwrap();
    assert_eq!(a.a_p, b.a_p);
    let s1 = find_coarse_pressures(&a.a_p, &mesh.q1_coords, &params).unwrap().0;
    let s2 = find_coarse_pressures(&b.a_p, &mesh.q1_coords, &params).unwrap().0;
    assert_eq!(s1, s2);
    let h1 = hierarchy(&ProblemSpec::lid_cavity(16), &HierarchyParams::default());
    let h2 = hierarchy(&ProblemSpec::lid_cavity(16), &HierarchyParams::default());
    for (l1, l2) in h1.levels.iter().zip(&h2.levels) {
        assert_eq!(l1.k, l2.k);
    }
}

#[test]
fn velocity_coarse_set_contains_colocated_partners() {
    for spec in [ProblemSpec::lid_cavity(16), ProblemSpec::backward_step(4, 1.0, 5.0), ProblemSpec::obstacle(8, 1.0)] {
        let h = hierarchy(&spec, &HierarchyParams::default());
        for level in &h.levels {
            let Some(t) = &level.transfer else { continue };
            for &c in &t.pressure_c_points {
                let Some(v) = level.colocation[c] else { continue };
                if !level.excluded[v] {
                    assert!(t.velocity_c_nodes.binary_search(&v).is_ok(), "pressure {c} lost its partner {v}");
                }
            }
        }
    }
}

#[test]
fn prolongators_reproduce_constants_per_component() {
    let specs = [
        ProblemSpec::lid_cavity(16),
        ProblemSpec::lid_cavity(32),
        ProblemSpec::backward_step(4, 1.0, 5.0),
        ProblemSpec::obstacle(8, 1.0),
    ];
    for spec in &specs {
        for params in [HierarchyParams::default(), HierarchyParams::default().navier_stokes()] {
            let h = hierarchy(spec, &params);
            assert!(h.n_levels() >= 2);
            let defect = constraint_defect(&h);
            assert!(defect <= 1e-12, "{:?}: {defect}", spec.domain);
        }
    }
}

#[test]
fn emin_energy_is_nonincreasing_and_stays_on_pattern() {
    let (mesh, sys) = stokes_problem(&ProblemSpec::lid_cavity(16)).unwrap();
    let params = CoarsenParams::default();
    let aux = form_aux_blocks(&sys.a, &sys.b, &params).unwrap();
    let (split, _) = find_coarse_pressures(&aux.a_p, &mesh.q1_coords, &params).unwrap();
    let z = sys.b.matmul(&sys.b.transpose()).unwrap();
    let pattern = pressure_pattern(&split).unwrap();
    let p0 = initial_prolongator(&pattern, None).unwrap();
    let problem = EminProblem::new(&z, &pattern, EminNorm::ANorm, 8).unwrap();
    let (p, history) = emin_iterate_with_history(&problem, &p0).unwrap();
    assert_eq!(history.len(), 9);
    for w in history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{history:?}");
    }
    assert!((energy(&z, &p, EminNorm::ANorm).unwrap() - history[8]).abs() <= 1e-9 * history[8]);
    for (i, j, _) in p.triplets() {
        assert!(pattern.contains(i, j), "({i}, {j}) off pattern");
    }
    for s in p.row_sums() {
        assert!((s - 1.0).abs() <= 1e-12);
    }

    let ns = mesh.n_q2();
    let a_x = sys.a.block(0..ns, 0..ns);
    let h = setup_hierarchy(&sys, &mesh, &HierarchyParams::default()).unwrap();
    let c_nodes = &h.levels[0].transfer.as_ref().unwrap().velocity_c_nodes;
    let excluded = &h.levels[0].excluded;
    let vpat = velocity_pattern_scalar(&Graph::from_matrix(&aux.a_v), c_nodes, excluded).unwrap();
    let p0 = initial_prolongator(&vpat, Some(excluded)).unwrap();
    let problem = EminProblem::new(&a_x, &vpat, EminNorm::ANorm, 4).unwrap();
    let (pv, history) = emin_iterate_with_history(&problem, &p0).unwrap();
    for w in history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{history:?}");
    }
    for (i, s) in pv.row_sums().iter().enumerate() {
        let want = if excluded[i] { 0.0 } else { 1.0 };
        assert!((s - want).abs() <= 1e-12, "row {i}: {s}");
    }
}

#[test]
fn divergence_free_linear_field_is_discretely_divergence_free() {
    for spec in [ProblemSpec::lid_cavity(7), ProblemSpec::backward_step(4, 1.0, 5.0), ProblemSpec::obstacle(8, 1.0)] {
        let (mesh, _) = stokes_problem(&spec).unwrap();
        let b = divergence_matrix(&mesh);
        let u = interpolate_velocity(&mesh, |x, y| [x, -y]);
        let bu = b.mul_vec(&u);
        let scale = b.max_abs();
        for (p, v) in bu.iter().enumerate() {
            assert!(v.abs() <= 1e-12 * scale, "pressure {p}: {v}");
        }
        let ones = vec![1.0; mesh.n_q1()];
        let bt1 = b.mul_vec_transpose(&ones);
        for (i, v) in bt1.iter().enumerate() {
            if mesh.q2_tags[i % mesh.n_q2()] == q2q1_amg::fem::NodeTag::Interior {
                assert!(v.abs() <= 1e-12 * scale, "velocity {i}: {v}");
            }
        }
    }
}

#[test]
fn stiffness_annihilates_constants_and_is_symmetric() {
    let (mesh, sys) = stokes_problem(&ProblemSpec::backward_step(4, 1.0, 5.0)).unwrap();
    let k = stiffness_matrix(&mesh);
    let r = k.mul_vec(&vec![1.0; k.n_cols()]);
    assert!(r.iter().all(|v| v.abs() <= 1e-12 * k.max_abs()));
    assert!(relative_symmetry_defect(&k) <= 1e-14);
    assert!(relative_symmetry_defect(&sys.a) <= 1e-14);
    assert!(relative_symmetry_defect(&sys.full_operator()) <= 1e-14);
}

#[test]
fn mass_matrix_rows_sum_to_the_domain_area() {
    for spec in [ProblemSpec::lid_cavity(5), ProblemSpec::backward_step(2, 1.0, 5.0), ProblemSpec::obstacle(8, 1.0)] {
        let (mesh, _) = stokes_problem(&spec).unwrap();
        let (mv, mp) = assemble_mass_matrices(&mesh);
        let area = mesh.area();
        let total_p: f64 = mp.row_sums().iter().sum();
        assert!((total_p - area).abs() <= 1e-12 * area);
        let total_v: f64 = mv.row_sums().iter().sum();
        assert!((total_v - 2.0 * area).abs() <= 1e-12 * area);
    }
}

#[test]
fn cavity_dof_counts_follow_the_mesh_formula() {
    for (m, dofs) in [(8, 659), (16, 2467), (32, 9539)] {
        assert_eq!(cavity(m).n_dofs(), dofs);
    }
}

#[test]
fn odd_mac_grids_decouple_colocated_pressures() {
    for n in (17..=41).step_by(2) {
        let sys = build_mac1d(n).unwrap();
        let (s, s_hat) = projected_mac_schur(&sys, VelocityPlacement::CoLocated).unwrap();
        for m in [&s, &s_hat] {
            let (vals, _) = q2q1_amg::dense::symmetric_eigen(m).unwrap();
            let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(vals.iter().all(|&v| v >= -1e-10 * scale));
            assert_eq!(vals.iter().filter(|v| v.abs() <= 1e-10 * scale).count(), 1, "n = {n}");
        }
        let (_, v) = second_eigenvector(&s).unwrap();
        assert!(sign_changes(&v) > 4, "n = {n}");
        let (s_mid, _) = projected_mac_schur(&sys, VelocityPlacement::MidPoint).unwrap();
        let (_, v) = second_eigenvector(&s_mid).unwrap();
        assert!(sign_changes(&v) <= 2, "n = {n}");
    }
}

#[test]
fn galerkin_lumped_masses_stay_positive() {
    let (mesh, sys) = stokes_problem(&ProblemSpec::lid_cavity(16)).unwrap();
    let h = setup_hierarchy(&sys, &mesh, &HierarchyParams::default()).unwrap();
    let (mv, mp) = assemble_mass_matrices(&mesh);
    let report = infsup_estimate(&h, &mv, &mp).unwrap();
    assert_eq!(report.levels.len(), h.n_levels());
    for l in &report.levels {
        assert!(l.min_lumped_velocity_mass > 0.0 && l.min_lumped_pressure_mass > 0.0, "{l:?}");
        assert!(l.sigma_min >= 0.0);
    }
}

#[test]
fn coarse_operators_are_symmetric_with_matching_dimensions() {
    let h = hierarchy(&ProblemSpec::lid_cavity(32), &HierarchyParams::default());
    for w in h.levels.windows(2) {
        let t = w[0].transfer.as_ref().unwrap();
        let ncv = t.p_v.n_cols();
        assert_eq!(w[1].n_v, 2 * ncv);
        assert_eq!(w[1].n_p, t.p_p.n_cols());
        assert_eq!(w[1].k.n_rows(), t.p.n_cols());
        assert!(relative_symmetry_defect(&w[1].k) <= 1e-12);
        for (i, j, _) in t.p.triplets() {
            assert_eq!(i >= w[0].n_v, j >= 2 * ncv, "P couples velocity and pressure at ({i}, {j})");
            if i < w[0].n_v {
                assert_eq!(i >= w[0].n_v / 2, j >= ncv, "P mixes velocity components at ({i}, {j})");
            }
        }
    }
    let last = h.levels.last().unwrap();
    let mut probe = vec![0.0; last.n_dofs()];
    probe[last.n_v..].fill(1.0);
    let r = last.k.mul_vec(&probe);
    let defect = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(defect / last.k.max_abs() <= 1e-10, "{defect}");
}

#[test]
fn gmres_basis_stays_orthogonal_and_residuals_do_not_grow() {
    let (mesh, sys) = stokes_problem(&ProblemSpec::lid_cavity(16)).unwrap();
    for kind in [SmootherKind::vanka(), SmootherKind::braess_sarazin(), SmootherKind::ilu()] {
        let params = HierarchyParams::default().with_smoother(kind, 1, 1);
        let h = setup_hierarchy(&sys, &mesh, &params).unwrap();
        let gp = GmresParams { check_orthogonality: true, ..GmresParams::default() };
        let rhs = sys.rhs();
        let out = h.solve(&rhs, &vec![0.0; rhs.len()], &gp).unwrap();
        assert!(out.converged);
        assert!(out.orthogonality_defect.unwrap() <= 1e-10);
        for w in out.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", out.history);
        }
        let again = h.solve(&rhs, &vec![0.0; rhs.len()], &gp).unwrap();
        assert_eq!(out.iterations, again.iterations);
    }
}

#[test]
fn smoothers_reduce_the_residual_steadily() {
    let sys = cavity(8);
    let k = sys.full_operator();
    let n_v = sys.n_velocity();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let b = vec![0.0; k.n_rows()];
    for kind in [SmootherKind::vanka(), SmootherKind::braess_sarazin(), SmootherKind::ilu()] {
        let s = Smoother::new(kind, &k, n_v).unwrap();
        let mut x: Vec<f64> = (0..k.n_rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut norms = Vec::new();
        for _ in 0..30 {
            s.smooth(&k, &mut x, &b, 1).unwrap();
            norms.push(k.residual(&x, &b).iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        for w in norms[3..].windows(2) {
            assert!(w[1] <= w[0], "{kind:?}: {norms:?}");
        }
    }
}

#[test]
fn interior_velocity_pattern_rows_have_one_to_six_entries() {
    let (mesh, sys) = stokes_problem(&ProblemSpec::lid_cavity(16)).unwrap();
    let params = CoarsenParams::default();
    let aux = form_aux_blocks(&sys.a, &sys.b, &params).unwrap();
    let h = setup_hierarchy(&sys, &mesh, &HierarchyParams::default()).unwrap();
    let t = h.levels[0].transfer.as_ref().unwrap();
    let ns = mesh.n_q2();
    let vpat = velocity_pattern_scalar(&Graph::from_matrix(&aux.a_v), &t.velocity_c_nodes, &h.levels[0].excluded).unwrap();
    let mut worst = Vec::new();
    for i in 0..ns {
        if mesh.q2_tags[i] != q2q1_amg::fem::NodeTag::Interior || t.velocity_c_nodes.contains(&i) {
            continue;
        }
        let nnz = vpat.row_nnz(i);
        if !(1..=6).contains(&nnz) {
            worst.push((i, nnz));
        }
    }
    assert!(worst.is_empty(), "{} interior rows outside 1..=6, e.g. {:?}", worst.len(), &worst[..worst.len().min(5)]);
}

#[test]
fn split_rejects_mismatched_coordinates() {
    let g = random_graph(5, 0.5, 1);
    assert!(split_pressures(&g, &[[0.0, 0.0]; 4], &CoarsenParams::default(), false).is_err());
}
