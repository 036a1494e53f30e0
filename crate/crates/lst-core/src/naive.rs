//! The explicit dense reference layer: forward, loss, upstream gradient,
//! and update with a fully materialized `W`.
//!
//! Every step costs O(D d m). This is the point: the layer is the
//! correctness oracle and the speed baseline for the factored
//! implementation, so it is written in the most literal form possible —
//! full `O = W H`, full dense output gradient — and shares no shortcuts
//! with the factored path.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::loss::{eval_with_grads, SphericalLoss};
use crate::mat::{matmul, DenseMat};
use crate::sparse::KSparseMat;

/// Dense output layer `o = W h` with `W : D x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveOutputLayer {
    w: DenseMat,
}

impl NaiveOutputLayer {
    pub fn new(w: DenseMat) -> Self {
        NaiveOutputLayer { w }
    }

    pub fn zeros(dim_out: usize, d: usize) -> Self {
        NaiveOutputLayer { w: DenseMat::zeros(dim_out, d) }
    }

    #[inline]
    pub fn dim_out(&self) -> usize {
        self.w.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.w.cols()
    }

    pub fn w(&self) -> &DenseMat {
        &self.w
    }

    pub fn w_mut(&mut self) -> &mut DenseMat {
        &mut self.w
    }

    /// One squared-error SGD step on a minibatch `H : d x m` with K-sparse
    /// targets `Y : D x m`.
    ///
    /// Returns the summed loss `L = sum_j |O_j - Y_j|^2` and the upstream
    /// gradient `grad_H = 2 W^T (O - Y)`, both for the pre-update `W`; then
    /// applies `W <- W - 2 eta (O - Y) H^T`.
    pub fn naive_mse_step(
        &mut self,
        h: &DenseMat,
        y: &KSparseMat,
        eta: f64,
    ) -> Result<(f64, DenseMat)> {
        let o = matmul(&self.w, false, h, false)?;
        let mut resid = o; // O - Y, densified
        let y_dense = y.densify();
        resid.add_scaled(&y_dense, -1.0)?;

        let mut loss = 0.0;
        for v in resid.data() {
            loss += v * v;
        }
        let grad_h = {
            let mut g = matmul(&self.w, true, &resid, false)?;
            g.scale(2.0);
            g
        };
        if eta != 0.0 {
            let step = matmul(&resid, false, h, true)?;
            self.w.add_scaled(&step, -2.0 * eta)?;
        }
        Ok((loss, grad_h))
    }

    /// One SGD step for any spherical loss, via the fully dense output
    /// gradient `grad_O = 2 O diag(grad_q) + 1_D grad_s^T + Yring`.
    ///
    /// Returns the summed loss and `grad_H = W^T grad_O` for the pre-update
    /// `W`, then applies `W <- W - eta grad_O H^T`.
    pub fn naive_spherical_step(
        &mut self,
        h: &DenseMat,
        targets: &KSparseMat,
        eta: f64,
        loss: &dyn SphericalLoss,
    ) -> Result<(f64, DenseMat)> {
        let dim = self.w.rows();
        let m = h.cols();
        let o = matmul(&self.w, false, h, false)?;

        // Spherical statistics computed the slow, literal way over all D.
        let mut q = vec![0.0; m];
        let mut s = vec![0.0; m];
        for i in 0..dim {
            let row = o.row(i);
            for j in 0..m {
                q[j] += row[j] * row[j];
                s[j] += row[j];
            }
        }
        let a: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                targets
                    .col(j)
                    .indices()
                    .iter()
                    .map(|&i| o.at(i, j))
                    .collect()
            })
            .collect();

        let batch = eval_with_grads(loss, &q, &s, targets, &a)?;

        // grad_O assembled as one dense D x m matrix, entry by entry.
        let mut grad_o = o;
        for i in 0..dim {
            for (j, v) in grad_o.row_mut(i).iter_mut().enumerate() {
                *v = 2.0 * *v * batch.grad_q[j] + batch.grad_s[j];
            }
        }
        let yring = targets.replace_values(&batch.grad_a)?;
        for (j, c) in yring.columns().iter().enumerate() {
            for (&i, &v) in c.indices().iter().zip(c.values()) {
                *grad_o.at_mut(i, j) += v;
            }
        }

        let grad_h = matmul(&self.w, true, &grad_o, false)?;
        if eta != 0.0 {
            let step = matmul(&grad_o, false, h, true)?;
            self.w.add_scaled(&step, -eta)?;
        }
        Ok((batch.total(), grad_h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::SquaredError;
    use crate::testutil::{lcg_mat, QSumLoss};
    use alloc::vec;

    fn sparse_cols(dim: usize, cols: Vec<(Vec<usize>, Vec<f64>)>) -> KSparseMat {
        KSparseMat::from_parts(dim, cols).unwrap()
    }

    #[test]
    fn mse_perfect_fit_gives_zero_loss_and_gradient() {
        // W nonzero only on rows {1, 3} so O is supported there; targets
        // equal O exactly.
        let mut w = DenseMat::zeros(6, 2);
        w.row_mut(1).copy_from_slice(&[0.5, -1.0]);
        w.row_mut(3).copy_from_slice(&[2.0, 0.25]);
        let mut layer = NaiveOutputLayer::new(w.clone());
        let h = lcg_mat(2, 3, 1);
        let o = matmul(&w, false, &h, false).unwrap();
        let y = sparse_cols(
            6,
            (0..3)
                .map(|j| (vec![1usize, 3], vec![o.at(1, j), o.at(3, j)]))
                .collect(),
        );
        let (loss, grad_h) = layer.naive_mse_step(&h, &y, 0.0).unwrap();
        assert!(loss.abs() <= 1e-24);
        assert!(grad_h.max_abs() <= 1e-12);
        assert_eq!(layer.w(), &w);
    }

    #[test]
    fn mse_zero_weight_case() {
        let mut layer = NaiveOutputLayer::zeros(8, 3);
        let h = lcg_mat(3, 2, 2);
        let y = sparse_cols(8, vec![(vec![0], vec![2.0]), (vec![5], vec![-3.0])]);
        let (loss, grad_h) = layer.naive_mse_step(&h, &y, 0.1).unwrap();
        assert!((loss - (4.0 + 9.0)).abs() <= 1e-12);
        assert_eq!(grad_h.max_abs(), 0.0);
    }

    #[test]
    fn mse_loss_matches_scalar_accumulation_oracle() {
        for seed in 0..10 {
            let w = lcg_mat(12, 4, seed);
            let mut layer = NaiveOutputLayer::new(w.clone());
            let h = lcg_mat(4, 3, seed + 20);
            let y = sparse_cols(
                12,
                vec![
                    (vec![0, 7], vec![1.0, -1.0]),
                    (vec![3], vec![2.0]),
                    (vec![], vec![]),
                ],
            );
            let (loss, _) = layer.naive_mse_step(&h, &y, 0.05).unwrap();

            let o = matmul(&w, false, &h, false).unwrap();
            let yd = y.densify();
            let mut oracle = 0.0;
            for i in 0..12 {
                for j in 0..3 {
                    let r = o.at(i, j) - yd.at(i, j);
                    oracle += r * r;
                }
            }
            assert!((loss - oracle).abs() <= 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn spherical_with_squared_error_tracks_mse_step() {
        let w0 = lcg_mat(10, 3, 5);
        let mut mse = NaiveOutputLayer::new(w0.clone());
        let mut sph = NaiveOutputLayer::new(w0);
        for step in 0..10 {
            let h = lcg_mat(3, 4, 100 + step);
            let y = sparse_cols(
                10,
                (0..4)
                    .map(|j| (vec![j, j + 5], vec![1.0, 0.5]))
                    .collect(),
            );
            let (l1, g1) = mse.naive_mse_step(&h, &y, 0.02).unwrap();
            let (l2, g2) = sph
                .naive_spherical_step(&h, &y, 0.02, &SquaredError)
                .unwrap();
            assert!((l1 - l2).abs() <= 1e-12 * l1.abs().max(1.0), "step {step}");
            assert!(g1.max_abs_diff(&g2) <= 1e-12, "step {step}");
            assert!(mse.w().max_abs_diff(sph.w()) <= 1e-12, "step {step}");
        }
    }

    #[test]
    fn spherical_zero_weight_q_only_loss() {
        let mut layer = NaiveOutputLayer::zeros(6, 2);
        let h = lcg_mat(2, 2, 9);
        // Squared error with empty targets reduces to l = q.
        let y = sparse_cols(6, vec![(vec![], vec![]), (vec![], vec![])]);
        let (loss, grad_h) = layer
            .naive_spherical_step(&h, &y, 0.0, &SquaredError)
            .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad_h.max_abs(), 0.0);
    }

    #[test]
    fn spherical_gradient_matches_finite_differences() {
        // Sum-dependent loss on a D = 20 instance; perturb each H entry.
        let w = lcg_mat(20, 3, 11);
        let h = lcg_mat(3, 2, 12);
        let targets = sparse_cols(20, vec![(vec![2, 9], vec![1.0, -0.5]), (vec![14], vec![2.0])]);

        let eval = |hm: &DenseMat| -> f64 {
            let mut layer = NaiveOutputLayer::new(w.clone());
            let (l, _) = layer
                .naive_spherical_step(hm, &targets, 0.0, &QSumLoss)
                .unwrap();
            l
        };
        let mut layer = NaiveOutputLayer::new(w.clone());
        let (_, grad_h) = layer
            .naive_spherical_step(&h, &targets, 0.0, &QSumLoss)
            .unwrap();

        for r in 0..3 {
            for c in 0..2 {
                let step = 1e-6 * h.at(r, c).abs().max(1.0);
                let mut hp = h.clone();
                *hp.at_mut(r, c) += step;
                let mut hm = h.clone();
                *hm.at_mut(r, c) -= step;
                let fd = (eval(&hp) - eval(&hm)) / (2.0 * step);
                let g = grad_h.at(r, c);
                assert!(
                    (fd - g).abs() <= 1e-5 * g.abs().max(1.0),
                    "entry ({r},{c}): fd {fd} vs grad {g}"
                );
            }
        }
    }

    #[test]
    fn eta_zero_leaves_state_unchanged() {
        let w = lcg_mat(7, 2, 13);
        let mut layer = NaiveOutputLayer::new(w.clone());
        let h = lcg_mat(2, 2, 14);
        let y = sparse_cols(7, vec![(vec![1], vec![1.0]), (vec![2], vec![1.0])]);
        layer.naive_mse_step(&h, &y, 0.0).unwrap();
        assert_eq!(layer.w(), &w);
        layer
            .naive_spherical_step(&h, &y, 0.0, &SquaredError)
            .unwrap();
        assert_eq!(layer.w(), &w);
    }
}
