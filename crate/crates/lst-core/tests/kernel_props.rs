//! Property suites for the dense kernels: inversion, SVD, and power
//! iteration against each other and against algebraic identities.

use lst_core::mat::{invert_square, matmul, power_iteration_extremes, svd_square, DenseMat};
use proptest::prelude::*;

fn dense(rows: usize, cols: usize) -> impl Strategy<Value = DenseMat> {
    proptest::collection::vec(-5.0..5.0f64, rows * cols)
        .prop_map(move |data| DenseMat::from_vec(rows, cols, data).unwrap())
}

/// Random square matrix kept invertible by diagonal dominance.
fn well_conditioned(n: usize) -> impl Strategy<Value = DenseMat> {
    dense(n, n).prop_map(move |mut a| {
        for i in 0..n {
            *a.at_mut(i, i) += 5.0 * n as f64;
        }
        a
    })
}

fn identity_residual(a: &DenseMat) -> f64 {
    a.max_abs_diff(&DenseMat::identity(a.rows()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matmul_transpose_flags_agree_with_explicit_transposes(
        (a, b) in (1usize..6, 1usize..6, 1usize..6)
            .prop_flat_map(|(r, k, c)| (dense(k, r), dense(k, c))),
    ) {
        // op(A) = A^T via flag must equal the materialized transpose.
        let with_flag = matmul(&a, true, &b, false).unwrap();
        let explicit = matmul(&a.transpose(), false, &b, false).unwrap();
        prop_assert!(with_flag.max_abs_diff(&explicit) == 0.0);
    }

    #[test]
    fn matmul_product_transpose_identity(
        (a, b) in (1usize..6, 1usize..6, 1usize..6)
            .prop_flat_map(|(r, k, c)| (dense(r, k), dense(k, c))),
    ) {
        // (A B)^T = B^T A^T, allowing round-off from the two orderings.
        let ab_t = matmul(&a, false, &b, false).unwrap().transpose();
        let bt_at = matmul(&b, true, &a, true).unwrap();
        prop_assert!(ab_t.max_abs_diff(&bt_at) <= 1e-12);
    }

    #[test]
    fn inverse_times_matrix_is_identity(
        a in (1usize..8).prop_flat_map(well_conditioned),
    ) {
        let inv = invert_square(&a).unwrap();
        let left = matmul(&inv, false, &a, false).unwrap();
        let right = matmul(&a, false, &inv, false).unwrap();
        prop_assert!(identity_residual(&left) <= 1e-10);
        prop_assert!(identity_residual(&right) <= 1e-10);
    }

    #[test]
    fn svd_factors_are_orthonormal_and_reconstruct(
        a in (1usize..7).prop_flat_map(|n| dense(n, n)),
    ) {
        let svd = svd_square(&a).unwrap();
        let ut_u = matmul(&svd.left_vectors, true, &svd.left_vectors, false).unwrap();
        let vt_v = matmul(&svd.right_vectors, true, &svd.right_vectors, false).unwrap();
        prop_assert!(identity_residual(&ut_u) <= 1e-10);
        prop_assert!(identity_residual(&vt_v) <= 1e-10);

        for w in svd.singular_values.windows(2) {
            prop_assert!(w[0] >= w[1], "singular values must be nonincreasing");
        }
        prop_assert!(svd.singular_values.iter().all(|&s| s >= 0.0));

        // A = U diag(sigma) V^T.
        let n = a.rows();
        let mut us = svd.left_vectors.clone();
        for c in 0..n {
            for r in 0..n {
                *us.at_mut(r, c) *= svd.singular_values[c];
            }
        }
        let recon = matmul(&us, false, &svd.right_vectors, true).unwrap();
        let scale = svd.singular_values[0].max(1.0);
        prop_assert!(recon.max_abs_diff(&a) <= 1e-10 * scale);
    }

    #[test]
    fn power_iteration_bounds_bracket_the_true_spectrum(
        a in (2usize..7).prop_flat_map(well_conditioned),
    ) {
        let inv = invert_square(&a).unwrap();
        let ext = power_iteration_extremes(&a, &inv, 200).unwrap();
        let svd = svd_square(&a).unwrap();
        let s_max = svd.singular_values[0];
        let s_min = *svd.singular_values.last().unwrap();

        // One-sided Rayleigh bounds: never past the true extremes.
        prop_assert!(ext.sigma_max <= s_max + 1e-9 * s_max.max(1.0));
        prop_assert!(ext.sigma_min >= s_min - 1e-9 * s_min.max(1.0));
        prop_assert!(ext.sigma_max > 0.0 && ext.sigma_min > 0.0);
        prop_assert!(ext.sigma_min <= ext.sigma_max * (1.0 + 1e-12));

        // And with this many iterations on well-separated diagonally
        // dominant matrices they are also close.
        prop_assert!(ext.sigma_max >= 0.9 * s_max);
        prop_assert!(ext.sigma_min <= 1.1 * s_min);
    }
}
