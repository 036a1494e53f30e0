//! The spherical loss family: losses that depend on the full output vector
//! `o` only through its squared norm `q = |o|^2`, its sum `s = sum(o)`, and
//! its coordinates `a = o_K` on the target's support `K`.
//!
//! Any such loss admits output-size-independent exact updates through the
//! factored layer, because its gradient with respect to `o` is
//! `2 o * dl/dq + 1_D * dl/ds` plus a K-sparse correction on the support.
//! The trait below is the extension point; squared error ships as the
//! canonical instance.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sparse::KSparseMat;

/// A member of the spherical loss family: `l(q, s, K, a, t)` with partial
/// derivatives in `q`, `s`, and each active coordinate `a_k`.
///
/// Implementations must be pure; partials are cross-checked against central
/// finite differences in the test suite, and any new loss should be too.
pub trait SphericalLoss {
    /// Per-example loss from the spherical statistics of one output column.
    fn eval(&self, q: f64, s: f64, support: &[usize], a: &[f64], t: &[f64]) -> f64;

    /// dl/dq at the same point.
    fn grad_q(&self, q: f64, s: f64, support: &[usize], a: &[f64], t: &[f64]) -> f64;

    /// dl/ds at the same point.
    fn grad_s(&self, q: f64, s: f64, support: &[usize], a: &[f64], t: &[f64]) -> f64;

    /// dl/da into `out` (same length and order as `a`).
    fn grad_a(
        &self,
        q: f64,
        s: f64,
        support: &[usize],
        a: &[f64],
        t: &[f64],
        out: &mut [f64],
    );

    /// Whether the loss reads `s = sum(o)` at all. When false, callers may
    /// skip maintaining the sum statistic (squared error does).
    fn uses_sum_of_outputs(&self) -> bool;
}

/// Losses and gradients for a minibatch of m examples.
#[derive(Debug, Clone)]
pub struct LossEvalBatch {
    /// Per-example losses, length m.
    pub losses: Vec<f64>,
    /// dl/dq per example, length m.
    pub grad_q: Vec<f64>,
    /// dl/ds per example, length m.
    pub grad_s: Vec<f64>,
    /// dl/da per example, jagged: `grad_a[j]` matches column j's support.
    pub grad_a: Vec<Vec<f64>>,
}

impl LossEvalBatch {
    /// Sum of the per-example losses.
    pub fn total(&self) -> f64 {
        self.losses.iter().sum()
    }
}

/// Evaluates a spherical loss and its partials over a minibatch.
///
/// `targets` carries both the support pattern `K` and the target values `T`;
/// `a[j]` holds the output coordinates on column j's support, in the same
/// (ascending-index) order the pattern stores them.
pub fn eval_with_grads(
    loss: &dyn SphericalLoss,
    q: &[f64],
    s: &[f64],
    targets: &KSparseMat,
    a: &[Vec<f64>],
) -> Result<LossEvalBatch> {
    let m = targets.n_cols();
    if q.len() != m || s.len() != m || a.len() != m {
        return Err(Error::DimMismatch {
            op: "eval_with_grads",
            lhs: (m, 1),
            rhs: (q.len(), a.len()),
        });
    }
    let mut out = LossEvalBatch {
        losses: Vec::with_capacity(m),
        grad_q: Vec::with_capacity(m),
        grad_s: Vec::with_capacity(m),
        grad_a: Vec::with_capacity(m),
    };
    for j in 0..m {
        let col = targets.col(j);
        let (support, t) = (col.indices(), col.values());
        if a[j].len() != t.len() {
            return Err(Error::DimMismatch {
                op: "eval_with_grads",
                lhs: (t.len(), 1),
                rhs: (a[j].len(), 1),
            });
        }
        out.losses.push(loss.eval(q[j], s[j], support, &a[j], t));
        out.grad_q.push(loss.grad_q(q[j], s[j], support, &a[j], t));
        out.grad_s.push(loss.grad_s(q[j], s[j], support, &a[j], t));
        let mut ga = vec![0.0; t.len()];
        loss.grad_a(q[j], s[j], support, &a[j], t, &mut ga);
        out.grad_a.push(ga);
    }
    Ok(out)
}

/// Squared error `|o - y|^2` written in spherical form. Since y is zero off
/// its support, `|o - y|^2 = q - 2 a^T t + |t|^2`; the loss never reads `s`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredError;

/// The canonical squared-error instance.
pub fn squared_error_loss() -> SquaredError {
    SquaredError
}

impl SphericalLoss for SquaredError {
    fn eval(&self, q: f64, _s: f64, _support: &[usize], a: &[f64], t: &[f64]) -> f64 {
        let mut acc = q;
        for (ak, tk) in a.iter().zip(t) {
            acc += -2.0 * ak * tk + tk * tk;
        }
        acc
    }

    fn grad_q(&self, _q: f64, _s: f64, _support: &[usize], _a: &[f64], _t: &[f64]) -> f64 {
        1.0
    }

    fn grad_s(&self, _q: f64, _s: f64, _support: &[usize], _a: &[f64], _t: &[f64]) -> f64 {
        0.0
    }

    fn grad_a(
        &self,
        _q: f64,
        _s: f64,
        _support: &[usize],
        _a: &[f64],
        t: &[f64],
        out: &mut [f64],
    ) {
        for (o, &tk) in out.iter_mut().zip(t) {
            *o = -2.0 * tk;
        }
    }

    fn uses_sum_of_outputs(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::dot;
    use crate::sparse::KSparseVec;
    use crate::testutil::{lcg_vec, QSumLoss};

    fn one_col_targets(dim: usize, idx: Vec<usize>, vals: Vec<f64>) -> KSparseMat {
        KSparseMat::from_columns(dim, vec![KSparseVec::new(dim, idx, vals).unwrap()])
            .unwrap()
    }

    #[test]
    fn squared_error_perfect_fit_is_zero() {
        // Output exactly equals the sparse target: a = t and q = |t|^2.
        let t = vec![0.5, -1.5, 2.0];
        let q = dot(&t, &t);
        let targets = one_col_targets(10, vec![1, 4, 7], t.clone());
        let batch =
            eval_with_grads(&SquaredError, &[q], &[0.0], &targets, &[t]).unwrap();
        assert!(batch.losses[0].abs() <= 1e-15);
    }

    #[test]
    fn squared_error_zero_target() {
        let targets = one_col_targets(10, vec![], vec![]);
        let batch =
            eval_with_grads(&SquaredError, &[3.25], &[0.0], &targets, &[vec![]]).unwrap();
        assert_eq!(batch.losses[0], 3.25);
        assert_eq!(batch.grad_q[0], 1.0);
        assert_eq!(batch.grad_s[0], 0.0);
        assert!(batch.grad_a[0].is_empty());
    }

    #[test]
    fn squared_error_matches_dense_norm_oracle() {
        // o = (1, 2), y = one-hot value 2 at index 1: spherical form gives
        // q - 2 a t + t^2 = 5 - 8 + 4 = 1, the dense |o - y|^2.
        let o = [1.0, 2.0];
        let q = dot(&o, &o);
        let targets = one_col_targets(2, vec![1], vec![2.0]);
        let batch =
            eval_with_grads(&SquaredError, &[q], &[0.0], &targets, &[vec![o[1]]]).unwrap();
        assert!((batch.losses[0] - 1.0).abs() <= 1e-15);

        // Random instances: spherical form vs literal dense accumulation.
        for seed in 0..30 {
            let o = lcg_vec(12, seed);
            let tvals = lcg_vec(3, seed + 40);
            let idx = vec![0usize, 5, 11];
            let targets = one_col_targets(12, idx.clone(), tvals.clone());
            let a: Vec<f64> = idx.iter().map(|&i| o[i]).collect();
            let q = dot(&o, &o);
            let batch =
                eval_with_grads(&SquaredError, &[q], &[0.0], &targets, &[a]).unwrap();
            let mut dense = 0.0;
            for (i, &oi) in o.iter().enumerate() {
                let y = idx.iter().position(|&k| k == i).map_or(0.0, |p| tvals[p]);
                dense += (oi - y) * (oi - y);
            }
            assert!((batch.losses[0] - dense).abs() <= 1e-12, "seed {seed}");
        }
    }

    /// Central finite differences of eval must match the declared partials.
    fn check_partials(loss: &dyn SphericalLoss, q: f64, s: f64, a: &[f64], t: &[f64]) {
        let support: Vec<usize> = (0..a.len()).collect();
        let rel = |x: f64| 1e-6 * x.abs().max(1.0);

        let hq = rel(q);
        let fd_q = (loss.eval(q + hq, s, &support, a, t)
            - loss.eval(q - hq, s, &support, a, t))
            / (2.0 * hq);
        let gq = loss.grad_q(q, s, &support, a, t);
        assert!((fd_q - gq).abs() <= 1e-5 * gq.abs().max(1.0), "dq {fd_q} vs {gq}");

        let hs = rel(s);
        let fd_s = (loss.eval(q, s + hs, &support, a, t)
            - loss.eval(q, s - hs, &support, a, t))
            / (2.0 * hs);
        let gs = loss.grad_s(q, s, &support, a, t);
        assert!((fd_s - gs).abs() <= 1e-5 * gs.abs().max(1.0), "ds {fd_s} vs {gs}");

        let mut ga = vec![0.0; a.len()];
        loss.grad_a(q, s, &support, a, t, &mut ga);
        for k in 0..a.len() {
            let mut ap = a.to_vec();
            let mut am = a.to_vec();
            let h = rel(a[k]);
            ap[k] += h;
            am[k] -= h;
            let fd = (loss.eval(q, s, &support, &ap, t)
                - loss.eval(q, s, &support, &am, t))
                / (2.0 * h);
            assert!(
                (fd - ga[k]).abs() <= 1e-5 * ga[k].abs().max(1.0),
                "da[{k}] {fd} vs {}",
                ga[k]
            );
        }
    }

    #[test]
    fn squared_error_partials_match_finite_differences() {
        for seed in 0..100 {
            let a = lcg_vec(3, seed);
            let t = lcg_vec(3, seed + 500);
            let q = 2.0 + lcg_vec(1, seed + 900)[0]; // well-scaled, positive
            let s = lcg_vec(1, seed + 1300)[0];
            check_partials(&SquaredError, q, s, &a, &t);
        }
    }

    #[test]
    fn sum_dependent_loss_partials_match_finite_differences() {
        for seed in 0..100 {
            let a = lcg_vec(3, seed + 7);
            let t = lcg_vec(3, seed + 600);
            let q = 2.0 + lcg_vec(1, seed + 950)[0];
            let s = lcg_vec(1, seed + 1400)[0];
            check_partials(&QSumLoss, q, s, &a, &t);
        }
    }

    #[test]
    fn eval_with_grads_checks_shapes() {
        let targets = one_col_targets(4, vec![0], vec![1.0]);
        assert!(matches!(
            eval_with_grads(&SquaredError, &[1.0, 2.0], &[0.0], &targets, &[vec![1.0]]),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            eval_with_grads(&SquaredError, &[1.0], &[0.0], &targets, &[vec![1.0, 2.0]]),
            Err(Error::DimMismatch { .. })
        ));
    }
}
