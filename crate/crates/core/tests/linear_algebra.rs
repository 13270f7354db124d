use std::sync::Arc;

use fsl_core::fem::{assemble_elasticity, ConstrainedSolver, DirichletSet, FunctionSpace, SpaceKind};
use fsl_core::linsolve::{reverse_cuthill_mckee, SparseCholesky};
use fsl_core::mesh::build_l_shape_mesh;
use fsl_core::sparse::{CsrMatrix, TripletBuilder};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Random sparse SPD matrix: a random sparse `B`, then `BᵀB + I`.
fn random_spd(n: usize, entries: &[(usize, usize, f64)]) -> (CsrMatrix, DMatrix<f64>) {
    let mut b = DMatrix::<f64>::zeros(n, n);
    for &(i, j, v) in entries {
        b[(i % n, j % n)] += v;
    }
    let dense = b.transpose() * &b + DMatrix::identity(n, n);
    let mut t = TripletBuilder::new(n, n);
    for i in 0..n {
        for j in 0..n {
            if dense[(i, j)] != 0.0 {
                t.push(i, j, dense[(i, j)]);
            }
        }
    }
    (t.build(), dense)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn skyline_cholesky_matches_dense(
        n in 1usize..40,
        entries in prop::collection::vec((0usize..40, 0usize..40, -3.0f64..3.0), 0..120),
        rhs_seed in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let (sparse, dense) = random_spd(n, &entries);
        let b = &rhs_seed[..n];
        let x = SparseCholesky::new(&sparse).unwrap().solve(b);
        let reference = dense.clone().cholesky().unwrap().solve(&DVector::from_column_slice(b));
        let scale = reference.amax().max(1e-300);
        for (xi, ri) in x.iter().zip(reference.iter()) {
            prop_assert!((xi - ri).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn rcm_is_a_permutation(
        n in 1usize..40,
        entries in prop::collection::vec((0usize..40, 0usize..40, -3.0f64..3.0), 0..120),
    ) {
        let (sparse, _) = random_spd(n, &entries);
        let mut perm = reverse_cuthill_mckee(&sparse);
        perm.sort_unstable();
        prop_assert_eq!(perm, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn indefinite_matrix_is_rejected() {
    let mut t = TripletBuilder::new(2, 2);
    t.push(0, 0, 1.0);
    t.push(0, 1, 2.0);
    t.push(1, 0, 2.0);
    t.push(1, 1, 1.0);
    assert!(SparseCholesky::new(&t.build()).is_err());
}

#[test]
fn constrained_elasticity_solve_has_small_residual() {
    let mesh = Arc::new(build_l_shape_mesh(8).unwrap());
    let space = FunctionSpace::new(mesh, SpaceKind::P2Vector2);
    let a = assemble_elasticity(&space, 41.667e9, 27.778e9).unwrap();
    // clamp every node on the left edge
    let fixed: Vec<(usize, f64)> = space
        .node_coords()
        .iter()
        .enumerate()
        .filter(|(_, x)| x[0] == 0.0)
        .flat_map(|(n, x)| [(space.dof(n, 0), 1e-3 * x[1]), (space.dof(n, 1), 0.0)])
        .collect();
    let set = DirichletSet::new(space.num_dofs(), fixed).unwrap();
    let solver = ConstrainedSolver::for_set(&a, &set).unwrap();
    let b: Vec<f64> = (0..space.num_dofs()).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
    let x = solver.solve(&b, &set).unwrap();
    let ax = a.mul_vec(&x);
    let mask = set.mask();
    let scale = a.max_abs() * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..space.num_dofs() {
        if mask[i] {
            assert_eq!(x[i], set.lift()[i]);
        } else {
            assert!((ax[i] - b[i]).abs() <= 1e-10 * scale, "row {i}");
        }
    }
}
