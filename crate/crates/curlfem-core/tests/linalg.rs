//! Solver-layer tests: direct LDLᵀ solves against closed forms and dense
//! elimination, GMRES behavior with and without ILU(0), orderings, and the
//! generalized smallest singular value on both code paths.

use curlfem_core::assembly::{
    assemble_blocks, assemble_load, assembly_quad_degree, manufactured_case, WaveParams,
};
use curlfem_core::fespace::{build_dof_map, SpaceKind};
use curlfem_core::linalg::{
    dof_positions, fill_reducing_order, gmres_solve, lu_solve, min_generalized_singular,
    residual_and_scale, ComplexLdl, FactorPrecision, Preconditioner, RealLdl, SolverKind,
    DIRECT_RESIDUAL_TOL, INF_SUP_DENSE_CAP,
};
use curlfem_core::mesh::build_cube_mesh;
use curlfem_core::sparse::{ComplexCsr, RealCsr};
use curlfem_core::{Complex64, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn identity(n: usize) -> ComplexCsr {
    let triplets = (0..n as u32).map(|i| (i, i, c(1.0, 0.0))).collect();
    ComplexCsr::from_triplets(n, n, triplets).unwrap()
}

fn random_rhs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Random complex symmetric matrix with a diagonal shift that keeps it well
/// conditioned, returned sparse together with its dense copy.
fn random_symmetric(
    rng: &mut ChaCha8Rng,
    n: usize,
    shift: Complex64,
) -> (ComplexCsr, Vec<Vec<Complex64>>) {
    let mut dense = vec![vec![Complex64::ZERO; n]; n];
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            let keep = i == j || rng.gen_bool(0.35);
            if !keep {
                continue;
            }
            let mut v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if i == j {
                v += shift;
            }
            dense[i][j] = v;
            dense[j][i] = v;
            triplets.push((i as u32, j as u32, v));
            if i != j {
                triplets.push((j as u32, i as u32, v));
            }
        }
    }
    let a = ComplexCsr::from_triplets(n, n, triplets).unwrap();
    (a, dense)
}

/// Dense Gaussian elimination with partial pivoting, as an independent
/// reference for the sparse factorization.
fn dense_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for k in 0..n {
        let (pivot_row, _) = (k..n)
            .map(|r| (r, a[r][k].norm()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        a.swap(k, pivot_row);
        b.swap(k, pivot_row);
        let pivot = a[k][k];
        assert!(pivot.norm() > 0.0, "reference elimination hit a zero pivot");
        for r in k + 1..n {
            let f = a[r][k] / pivot;
            if f.norm() == 0.0 {
                continue;
            }
            for col in k..n {
                let upd = f * a[k][col];
                a[r][col] -= upd;
            }
            let upd = f * b[k];
            b[r] -= upd;
        }
    }
    let mut x = vec![Complex64::ZERO; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    x
}

fn rel_diff(x: &[Complex64], y: &[Complex64]) -> f64 {
    let num: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

#[test]
fn identity_solve_returns_rhs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = identity(7);
    let b = random_rhs(&mut rng, 7);
    let (x, report) = lu_solve(&a, &b, None).unwrap();
    assert_eq!(report.solver, SolverKind::DirectLdl);
    assert!(report.converged);
    for (xi, bi) in x.iter().zip(&b) {
        assert!((xi - bi).norm() <= 1e-15);
    }
}

#[test]
fn small_system_matches_closed_form() {
    let a = ComplexCsr::from_triplets(
        2,
        2,
        vec![
            (0, 0, c(2.0, 0.0)),
            (0, 1, c(0.0, 1.0)),
            (1, 0, c(0.0, 1.0)),
            (1, 1, c(2.0, 0.0)),
        ],
    )
    .unwrap();
    let b = vec![c(1.0, 0.0), c(0.0, 0.0)];
    let (x, _) = lu_solve(&a, &b, None).unwrap();
    assert!((x[0] - c(0.4, 0.0)).norm() <= 1e-14);
    assert!((x[1] - c(0.0, -0.2)).norm() <= 1e-14);
}

#[test]
fn random_symmetric_solve_matches_dense_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for &n in &[5usize, 24, 60] {
        let (a, dense) = random_symmetric(&mut rng, n, c(6.0, 2.0));
        let b = random_rhs(&mut rng, n);
        let (x, report) = lu_solve(&a, &b, None).unwrap();
        let reference = dense_solve(dense, b.clone());
        assert!(
            rel_diff(&x, &reference) <= 1e-10,
            "n = {n}: sparse and dense solutions diverge"
        );
        assert!(report.rel_residual <= DIRECT_RESIDUAL_TOL);
    }
}

#[test]
fn refinement_meets_residual_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let (a, _) = random_symmetric(&mut rng, 50, c(8.0, 0.0));
    let b = random_rhs(&mut rng, 50);
    let (x, _) = lu_solve(&a, &b, None).unwrap();
    let (res, scale) = residual_and_scale(&a, &x, &b);
    assert!(res <= DIRECT_RESIDUAL_TOL * scale);
}

#[test]
fn zero_matrix_is_reported() {
    let a =
        ComplexCsr::from_triplets(3, 3, (0..3).map(|i| (i, i, Complex64::ZERO)).collect()).unwrap();
    let b = vec![c(1.0, 0.0); 3];
    match lu_solve(&a, &b, None) {
        Err(Error::SolverFailure(_)) | Err(Error::SingularMatrix(_)) => {}
        other => panic!("zero matrix must fail the residual acceptance, got {other:?}"),
    }
}

#[test]
fn orderings_are_permutations_and_do_not_change_solutions() {
    let mesh = build_cube_mesh(1).unwrap();
    let params = WaveParams::new(4.0, 2).unwrap();
    let dofs = build_dof_map(&mesh, params.nedelec_index(), SpaceKind::Hcurl).unwrap();
    let blocks = assemble_blocks(&mesh, &dofs, assembly_quad_degree(2)).unwrap();
    let a = blocks.standard(4.0).unwrap();
    let positions = dof_positions(&mesh, &dofs);
    assert_eq!(positions.len(), dofs.ndof);

    let with_coords = fill_reducing_order(&a, Some(&positions));
    let graph_only = fill_reducing_order(&a, None);
    for order in [&with_coords, &graph_only] {
        let mut sorted = (*order).clone();
        sorted.sort_unstable();
        assert!(sorted.into_iter().eq(0..dofs.ndof), "not a permutation");
    }
    assert_eq!(
        with_coords,
        fill_reducing_order(&a, Some(&positions)),
        "ordering must be deterministic"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let b = random_rhs(&mut rng, dofs.ndof);
    let (x_nd, _) = lu_solve(&a, &b, Some(&positions)).unwrap();
    let (x_rcm, _) = lu_solve(&a, &b, None).unwrap();
    assert!(rel_diff(&x_nd, &x_rcm) <= 1e-9);
}

#[test]
fn gmres_identity_converges_in_one_iteration() {
    let a = identity(9);
    let b: Vec<Complex64> = (0..9).map(|i| c(i as f64 + 1.0, -0.5)).collect();
    let (x, report) = gmres_solve(&a, &b, 1e-12, 100, Preconditioner::None).unwrap();
    assert_eq!(report.iterations, 1);
    assert!(report.converged);
    assert!(rel_diff(&x, &b) <= 1e-12);
}

#[test]
fn gmres_matches_direct_on_small_system() {
    let a = ComplexCsr::from_triplets(
        2,
        2,
        vec![
            (0, 0, c(2.0, 0.0)),
            (0, 1, c(0.0, 1.0)),
            (1, 0, c(0.0, 1.0)),
            (1, 1, c(2.0, 0.0)),
        ],
    )
    .unwrap();
    let b = vec![c(1.0, 0.0), c(0.0, 0.0)];
    let tol = 1e-12;
    let (x_g, report) = gmres_solve(&a, &b, tol, 50, Preconditioner::None).unwrap();
    assert!(report.converged);
    let (x_d, _) = lu_solve(&a, &b, None).unwrap();
    assert!(rel_diff(&x_g, &x_d) <= 10.0 * tol);
}

#[test]
fn gmres_diagonal_converges_within_dimension() {
    let n = 40usize;
    let triplets = (0..n as u32)
        .map(|i| (i, i, c(i as f64 + 1.0, 0.0)))
        .collect();
    let a = ComplexCsr::from_triplets(n, n, triplets).unwrap();
    let b = vec![c(1.0, 1.0); n];
    let (x, report) = gmres_solve(&a, &b, 1e-12, 500, Preconditioner::None).unwrap();
    assert!(report.converged);
    assert!(
        report.iterations <= n,
        "a Krylov method is exact after n steps, took {}",
        report.iterations
    );
    for (i, xi) in x.iter().enumerate() {
        let exact = b[i] / (i as f64 + 1.0);
        assert!((xi - exact).norm() <= 1e-10);
    }
}

#[test]
fn gmres_reports_nonconvergence_without_aborting() {
    let n = 40usize;
    let triplets = (0..n as u32)
        .map(|i| (i, i, c((i as f64 + 1.0) * (-1.0f64).powi(i as i32), 0.0)))
        .collect();
    let a = ComplexCsr::from_triplets(n, n, triplets).unwrap();
    let b = vec![c(0.3, -0.7); n];
    let (_, report) = gmres_solve(&a, &b, 1e-14, 3, Preconditioner::None).unwrap();
    assert!(!report.converged);
    assert!(report.rel_residual > 1e-14);
    assert!(report.iterations <= 3);
}

#[test]
fn gmres_with_ilu0_solves_an_assembled_system() {
    let mesh = build_cube_mesh(1).unwrap();
    let params = WaveParams::new(4.0, 1).unwrap();
    let dofs = build_dof_map(&mesh, params.nedelec_index(), SpaceKind::Hcurl).unwrap();
    let blocks = assemble_blocks(&mesh, &dofs, assembly_quad_degree(1)).unwrap();
    let a = blocks.standard(4.0).unwrap();
    let case = manufactured_case("cube-smooth", 4.0).unwrap();
    let b = assemble_load(&mesh, &dofs, &case, 4.0, assembly_quad_degree(1)).unwrap();

    let tol = 1e-10;
    let (x_g, report) = gmres_solve(&a, &b, tol, 5_000, Preconditioner::Ilu0).unwrap();
    assert!(report.converged, "rel residual {}", report.rel_residual);
    let (x_d, _) = lu_solve(&a, &b, None).unwrap();
    assert!(rel_diff(&x_g, &x_d) <= 1e-6);
}

#[test]
fn lu_and_gmres_agree_on_a_large_banded_system() {
    let n = 2000usize;
    let mut triplets: Vec<(u32, u32, Complex64)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for i in 0..n {
        for off in 1..=3usize {
            if i + off < n {
                let v = c(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
                triplets.push((i as u32, (i + off) as u32, v));
                triplets.push(((i + off) as u32, i as u32, v));
            }
        }
        triplets.push((i as u32, i as u32, c(5.0 + rng.gen_range(0.0..1.0), 1.5)));
    }
    let a = ComplexCsr::from_triplets(n, n, triplets).unwrap();
    let b = random_rhs(&mut rng, n);
    let tol = 1e-10;
    let (x_d, _) = lu_solve(&a, &b, None).unwrap();
    let (x_g, report) = gmres_solve(&a, &b, tol, 4_000, Preconditioner::Ilu0).unwrap();
    assert!(report.converged);
    assert!(rel_diff(&x_g, &x_d) <= 10.0 * tol);
}

fn real_spd(n: usize, rng: &mut ChaCha8Rng) -> RealCsr {
    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
    for i in 0..n {
        if i + 1 < n {
            let v = rng.gen_range(-0.3..0.3);
            triplets.push((i as u32, (i + 1) as u32, v));
            triplets.push(((i + 1) as u32, i as u32, v));
        }
        triplets.push((i as u32, i as u32, 2.0 + rng.gen_range(0.0..1.0)));
    }
    RealCsr::from_triplets(n, n, triplets).unwrap()
}

fn complex_copy_scaled(m: &RealCsr, factor: f64) -> ComplexCsr {
    let mut triplets = Vec::new();
    for i in 0..m.nrows {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            triplets.push((i as u32, j, c(factor * v, 0.0)));
        }
    }
    ComplexCsr::from_triplets(m.nrows, m.ncols, triplets).unwrap()
}

#[test]
fn gamma_is_one_when_the_matrices_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let n_imp = real_spd(30, &mut rng);
    let a = complex_copy_scaled(&n_imp, 1.0);
    let gamma = min_generalized_singular(&a, &n_imp, None, INF_SUP_DENSE_CAP, 7).unwrap();
    assert!((gamma - 1.0).abs() <= 1e-10, "gamma = {gamma}");

    let a2 = complex_copy_scaled(&n_imp, 2.0);
    let gamma2 = min_generalized_singular(&a2, &n_imp, None, INF_SUP_DENSE_CAP, 7).unwrap();
    assert!((gamma2 - 2.0).abs() <= 1e-10, "gamma = {gamma2}");
}

#[test]
fn gamma_of_a_diagonal_pair_is_the_smallest_ratio() {
    let a =
        ComplexCsr::from_triplets(2, 2, vec![(0, 0, c(1.0, 0.0)), (1, 1, c(3.0, 0.0))]).unwrap();
    let n_imp = RealCsr::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
    let gamma = min_generalized_singular(&a, &n_imp, None, INF_SUP_DENSE_CAP, 3).unwrap();
    assert!((gamma - 1.0).abs() <= 1e-12);
}

#[test]
fn iterative_gamma_matches_the_dense_path() {
    // diagonal pair with an analytic answer: B = N^{-1/2} A N^{-1/2} has
    // singular values |a_i| / n_i
    let n = 120usize;
    let mut a_triplets = Vec::new();
    let mut n_triplets = Vec::new();
    let mut oracle = f64::INFINITY;
    for i in 0..n {
        let ai = c(0.8 + 0.05 * i as f64, 0.3);
        let ni = 1.0 + 0.01 * i as f64;
        oracle = oracle.min(ai.norm() / ni);
        a_triplets.push((i as u32, i as u32, ai));
        n_triplets.push((i as u32, i as u32, ni));
    }
    let a = ComplexCsr::from_triplets(n, n, a_triplets).unwrap();
    let n_imp = RealCsr::from_triplets(n, n, n_triplets).unwrap();

    let dense = min_generalized_singular(&a, &n_imp, None, INF_SUP_DENSE_CAP, 13).unwrap();
    let iterative = min_generalized_singular(&a, &n_imp, None, 0, 13).unwrap();
    assert!((dense - oracle).abs() <= 1e-10 * oracle);
    assert!(
        (iterative - oracle).abs() <= 1e-5 * oracle,
        "iterative {iterative} vs oracle {oracle}"
    );
}

#[test]
fn permuting_the_unknowns_leaves_gamma_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(211);
    let n = 24usize;
    let n_imp = real_spd(n, &mut rng);
    let (a, _) = random_symmetric(&mut rng, n, c(4.0, 1.0));
    let gamma = min_generalized_singular(&a, &n_imp, None, INF_SUP_DENSE_CAP, 1).unwrap();

    let mut perm: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let permute_c = |m: &ComplexCsr| {
        let mut t = Vec::new();
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((perm[i], perm[j as usize], v));
            }
        }
        ComplexCsr::from_triplets(n, n, t).unwrap()
    };
    let permute_r = |m: &RealCsr| {
        let mut t = Vec::new();
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((perm[i], perm[j as usize], v));
            }
        }
        RealCsr::from_triplets(n, n, t).unwrap()
    };
    let gamma_p = min_generalized_singular(
        &permute_c(&a),
        &permute_r(&n_imp),
        None,
        INF_SUP_DENSE_CAP,
        1,
    )
    .unwrap();
    assert!((gamma - gamma_p).abs() <= 1e-10 * gamma);
}

#[test]
fn indefinite_norm_matrix_is_rejected() {
    let a = identity(2);
    let n_imp = RealCsr::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
    match min_generalized_singular(&a, &n_imp, None, INF_SUP_DENSE_CAP, 1) {
        Err(Error::InvalidArgument(_)) => {}
        other => panic!("indefinite norm matrix must be rejected, got {other:?}"),
    }
}

#[test]
fn dof_positions_sit_on_their_entities() {
    let mesh = build_cube_mesh(1).unwrap();
    let dofs = build_dof_map(&mesh, 1, SpaceKind::Hcurl).unwrap();
    let pos = dof_positions(&mesh, &dofs);
    assert_eq!(pos.len(), dofs.ndof);
    for (e, ends) in dofs.edges.iter().enumerate() {
        let a = mesh.vertices[ends[0] as usize];
        let b = mesh.vertices[ends[1] as usize];
        for m in 0..dofs.dofs_per_edge {
            let p = pos[dofs.edge_dof(e, m) as usize];
            for axis in 0..3 {
                assert!((p[axis] - (a[axis] + b[axis]) / 2.0).abs() <= 1e-15);
            }
        }
    }
    for p in &pos {
        for axis in 0..3 {
            assert!(p[axis].abs() <= 1.0 + 1e-12);
        }
    }

    let scalar = build_dof_map(&mesh, 2, SpaceKind::H1).unwrap();
    let spos = dof_positions(&mesh, &scalar);
    for v in 0..mesh.vertices.len() {
        assert_eq!(spos[v], mesh.vertices[v]);
    }
}

/// A factor stored in single precision plus double-precision refinement
/// still delivers the full direct-solve residual contract.
#[test]
fn single_precision_factor_refines_to_double_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let n = 120;
    let (a, dense) = random_symmetric(&mut rng, n, c(6.0, 1.5));
    let b = random_rhs(&mut rng, n);

    let factor = ComplexLdl::with_precision(&a, None, FactorPrecision::Single).unwrap();
    assert!(factor.is_single_precision());

    // One raw solve lands near f32 accuracy, not f64.
    let x0 = factor.solve(&b);
    let (res0, scale0) = residual_and_scale(&a, &x0, &b);
    assert!(res0 > DIRECT_RESIDUAL_TOL * scale0);

    // Refinement in double precision walks it down to the contract.
    let mut x = x0;
    let mut met = false;
    for _ in 0..30 {
        let ax = a.mul(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = factor.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        let (res, scale) = residual_and_scale(&a, &x, &b);
        if res <= DIRECT_RESIDUAL_TOL * scale {
            met = true;
            break;
        }
    }
    assert!(met, "refinement never reached the residual contract");
    let reference = dense_solve(dense, b);
    assert!(rel_diff(&x, &reference) <= 1e-8);
}

/// The real factorization honours a forced precision too, and its complex
/// solve stays componentwise exact for the identity.
#[test]
fn real_factor_precision_can_be_forced() {
    let n = 30;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = real_spd(n, &mut rng);
    let double = RealLdl::with_precision(&a, None, FactorPrecision::Double).unwrap();
    let single = RealLdl::with_precision(&a, None, FactorPrecision::Single).unwrap();
    assert!(!double.is_single_precision());
    assert!(single.is_single_precision());
    assert_eq!(double.nnz_l(), single.nnz_l());

    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 1.2).collect();
    let xd = double.solve(&b);
    let xs = single.solve(&b);
    for (d, s) in xd.iter().zip(&xs) {
        assert!(
            (d - s).abs() <= 1e-4 * (1.0 + d.abs()),
            "single too far from double"
        );
    }

    let bc: Vec<Complex64> = b.iter().map(|&v| c(v, -0.25 * v)).collect();
    let xc = double.solve_complex(&bc);
    for (z, d) in xc.iter().zip(&xd) {
        assert!((z.re - d).abs() <= 1e-12 * (1.0 + d.abs()));
        assert!((z.im + 0.25 * d).abs() <= 1e-12 * (1.0 + d.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Diagonally dominant complex symmetric systems of any shape solve to
    /// the advertised residual bound and match dense elimination.
    #[test]
    fn direct_solves_meet_the_contract(seed in 0u64..1_000, n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, dense) = random_symmetric(&mut rng, n, c(5.0 + n as f64 * 0.2, 1.0));
        let b = random_rhs(&mut rng, n);
        let (x, report) = lu_solve(&a, &b, None).unwrap();
        prop_assert!(report.converged);
        let (res, scale) = residual_and_scale(&a, &x, &b);
        prop_assert!(res <= DIRECT_RESIDUAL_TOL * scale);
        let reference = dense_solve(dense, b);
        prop_assert!(rel_diff(&x, &reference) <= 1e-9);
    }

    /// Both ordering strategies always produce permutations.
    #[test]
    fn orderings_are_always_permutations(seed in 0u64..1_000, n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, _) = random_symmetric(&mut rng, n, c(3.0, 0.0));
        let positions: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        for order in [fill_reducing_order(&a, None), fill_reducing_order(&a, Some(&positions))] {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            prop_assert!(sorted.into_iter().eq(0..n));
        }
    }
}
