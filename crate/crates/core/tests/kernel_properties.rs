mod common;

use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rjar_core::RidgeKernel;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn svd_routes_match_direct_solve(seed in any::<u64>(), n in 3usize..40, k in 1usize..80) {
        let mut r = rng(seed);
        let z = gaussian_matrix(&mut r, n, k);
        let e = gaussian_vector(&mut r, n);
        let kern = RidgeKernel::new(&z).unwrap();
        for gamma in checked_penalties(kern.full_column_rank()) {
            let err = oracle_disagreement(&z, &e, gamma);
            prop_assert!(err < 1e-8, "gamma = {}: {}", gamma, err);
        }
    }

    #[test]
    fn kernel_invariants(seed in any::<u64>(), n in 2usize..60, k in 1usize..90) {
        let z = gaussian_matrix(&mut rng(seed), n, k);
        let kern = RidgeKernel::new(&z).unwrap();
        let r = kern.rank();
        prop_assert_eq!(r, n.min(k));
        let u = kern.left_vectors();
        let gram = u.transpose() * u;
        prop_assert!((gram - DMatrix::<f64>::identity(r, r)).amax() < 1e-10);
        let d = kern.singular_values();
        prop_assert!(d.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(d[r - 1] > kern.rank_tol());
    }

    #[test]
    fn eigenvalues_are_shrinkage_weights(seed in any::<u64>(), n in 2usize..30, k in 1usize..50, g in 0.0f64..5.0) {
        let z = gaussian_matrix(&mut rng(seed), n, k);
        let kern = RidgeKernel::new(&z).unwrap();
        let gamma = if kern.full_column_rank() { g } else { g + 0.1 };
        let p = kern.materialize(gamma, false).unwrap();
        prop_assert_eq!(&p, &p.transpose());
        let mut eig: Vec<f64> = SymmetricEigen::new(p).eigenvalues.iter().cloned().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let mut w = kern.shrinkage_weights(gamma).unwrap();
        w.resize(n, 0.0);
        for (a, b) in eig.iter().zip(&w) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

/// Projection-matrix properties on random designs, including wide ones.
#[test]
fn projection_matrix_properties() {
    let mut r = rng(20240611);
    for case in 0..60 {
        let n = 3 + case % 50;
        let k = if case % 2 == 0 { 1 + (case * 7) % n } else { n + 1 + (case * 13) % 120 };
        let kern = RidgeKernel::new(&gaussian_matrix(&mut r, n, k)).unwrap();
        for gamma in checked_penalties(kern.full_column_rank()) {
            check_projection_properties(&kern, gamma, 1e-9).unwrap();
        }
    }
}

#[test]
fn off_diagonal_mass_vanishes_for_huge_penalty() {
    let mut r = rng(7);
    for &(n, k) in &[(40, 20), (30, 70), (50, 49)] {
        let z = standardise(&gaussian_matrix(&mut r, n, k));
        let kern = RidgeKernel::new(&z).unwrap();
        let sel = rjar_core::select_gamma(&kern, 1.0).unwrap();
        let dmax = kern.singular_values()[0];
        let far = kern.offdiag_sq_sum(1e8 * dmax * dmax).unwrap();
        assert!(far < 1e-12 * sel.s_at_star, "S far = {far}, S* = {}", sel.s_at_star);
    }
}

#[test]
fn rank_after_partialling_nine_covariates() {
    // 124 observations, 342 interacted instruments, 9 covariates partialled out.
    let mut r = rng(124);
    let base = gaussian_matrix(&mut r, 124, 38);
    let mut w = gaussian_matrix(&mut r, 124, 9);
    w.column_mut(0).fill(1.0);
    let z = rjar_core::interact_instruments(&base, &w).unwrap();
    assert_eq!(z.ncols(), 342);
    let d = rjar_core::Dataset::new(gaussian_vector(&mut r, 124), gaussian_matrix(&mut r, 124, 1), z, Some(w)).unwrap();
    let pd = rjar_core::partial_and_standardise(&d).unwrap();
    let kern = RidgeKernel::new(&pd.z).unwrap();
    assert_eq!(kern.rank(), 115);
    assert!(!kern.full_column_rank());
}

#[test]
fn streaming_hadamard_for_large_n() {
    let mut r = rng(99);
    let z = gaussian_matrix(&mut r, 50, 80);
    let e = gaussian_vector(&mut r, 50);
    let kern = RidgeKernel::new(&z).unwrap();
    let dense = kern.hadamard_sq_quad(2.0, &e).unwrap();
    let streamed = kern.with_materialize_threshold(10).hadamard_sq_quad(2.0, &e).unwrap();
    assert!(rel_err(streamed, dense) < 1e-12);
}
