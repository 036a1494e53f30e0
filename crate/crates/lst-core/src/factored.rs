//! The implicit output layer `W = V U + 1_D w^T` with exact
//! output-size-independent SGD updates.
//!
//! Instead of storing and updating the D x d matrix `W` directly, the layer
//! keeps the factors `V` (D x d), `U` (d x d), and the offset vector `omega`
//! (d), plus three bookkeeping quantities that make loss and gradient
//! evaluation D-free:
//!
//! - `Q = W^T W` (d x d), giving `|W h|^2 = h^T Q h` in O(d^2);
//! - `wbar = W^T 1_D` (d), giving `sum(W h) = h^T wbar` in O(d);
//! - `u_inv_t`, a tracked transpose-inverse of `U`, advanced by
//!   Sherman-Morrison / Woodbury identities alongside `U` itself.
//!
//! Each update routine reproduces the dense SGD step on `W` exactly (to
//! round-off): dense updates of the form `W <- W - eta G H^T`, where the
//! output-gradient `G` is `2 O diag(grad_q) + 1_D grad_s^T + Yring` for a
//! spherical loss, decompose into a d x d update of `U`, a K m-row update
//! of `V`, and an O(d) update of `omega`. The per-step cost is
//! O(m d^2 + m^2 d + m^3 + K m d), with no term proportional to D.
//!
//! Every fallible step (the singularity checks guarding the tracked
//! inverse) runs before any state is mutated, so a failed update leaves the
//! layer exactly as it was.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::loss::{eval_with_grads, SphericalLoss};
use crate::mat::{axpy, dot, invert_square, matmul, DenseMat};
use crate::sparse::{
    scatter_row_update, scatter_vec_update, sparse_column_sums,
    sparse_transpose_times_dense, sparse_vec_transpose_times_dense, KSparseMat,
    KSparseVec,
};
use crate::stabilize::{singular_stabilize, StabilizeConfig, StabilizeReport};

/// Initialization of the V factor (U always starts at the identity and
/// omega at zero, so the initial `W` equals the initial `V`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VInit {
    Zeros,
    /// Gaussian entries, `scale * N(0, 1)`, from a seeded generator.
    Random { seed: u64, scale: f64 },
}

/// D-free forward statistics of one minibatch `H : d x m`.
///
/// For the implicit `W`, with `O = W H` never materialized:
/// `h_hat = Q H`, `m_hat = H^T h_hat = O^T O`, `q = diag(m_hat)` (squared
/// column norms of O), `s = H^T wbar` (column sums of O; zeros unless
/// requested), `h_tilde = U H`, `h_omega = H^T omega`, and `a[j]` holds the
/// entries of `O`'s column j at the target support, in the support's stored
/// (ascending-index) order.
#[derive(Debug, Clone)]
pub struct ForwardStats {
    pub h_hat: DenseMat,
    pub m_hat: DenseMat,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub h_tilde: DenseMat,
    pub h_omega: Vec<f64>,
    pub a: Vec<Vec<f64>>,
}

/// Output layer `o = W h` with `W = V U + 1_D omega^T` kept implicit.
#[derive(Debug, Clone)]
pub struct FactoredOutputLayer {
    pub(crate) v: DenseMat,
    pub(crate) u: DenseMat,
    pub(crate) omega: Vec<f64>,
    pub(crate) q: DenseMat,
    pub(crate) u_inv_t: DenseMat,
    pub(crate) wbar: Vec<f64>,
    pub(crate) update_counter: u64,
    pub(crate) config: StabilizeConfig,
    pub(crate) last_stabilize: Option<StabilizeReport>,
}

impl FactoredOutputLayer {
    /// Fresh layer: `U = I`, `u_inv_t = I`, `omega = 0`, so `W` equals the
    /// initial `V` exactly; `Q` and `wbar` are the corresponding Gram and
    /// column-sum quantities (computed directly for a random `V`, zero for
    /// a zero `V`).
    pub fn init(dim_out: usize, d: usize, v_init: VInit) -> Self {
        assert!(dim_out >= 1 && d >= 1, "layer dimensions must be positive");
        let v = match v_init {
            VInit::Zeros => DenseMat::zeros(dim_out, d),
            VInit::Random { seed, scale } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                DenseMat::from_fn(dim_out, d, |_, _| {
                    let x: f64 = rng.sample(StandardNormal);
                    scale * x
                })
            }
        };
        let (q, wbar) = match v_init {
            VInit::Zeros => (DenseMat::zeros(d, d), vec![0.0; d]),
            VInit::Random { .. } => {
                let q = matmul(&v, true, &v, false).expect("V^T V shapes agree");
                let ones = vec![1.0; dim_out];
                (q, v.matvec_t(&ones))
            }
        };
        FactoredOutputLayer {
            v,
            u: DenseMat::identity(d),
            omega: vec![0.0; d],
            q,
            u_inv_t: DenseMat::identity(d),
            wbar,
            update_counter: 0,
            config: StabilizeConfig::default(),
            last_stabilize: None,
        }
    }

    /// Reassembles a layer from explicit state, e.g. a checkpoint. Shapes
    /// are validated; numerical consistency of the bookkeeping fields is
    /// the caller's responsibility.
    pub fn from_parts(
        v: DenseMat,
        u: DenseMat,
        omega: Vec<f64>,
        q: DenseMat,
        u_inv_t: DenseMat,
        wbar: Vec<f64>,
        config: StabilizeConfig,
    ) -> Result<Self> {
        assert!(config.is_valid(), "invalid stabilize configuration");
        let d = v.cols();
        for (mat, name) in [(&u, "U"), (&q, "Q"), (&u_inv_t, "u_inv_t")] {
            if mat.rows() != d || mat.cols() != d {
                let _ = name;
                return Err(Error::DimMismatch {
                    op: "from_parts",
                    lhs: (d, d),
                    rhs: (mat.rows(), mat.cols()),
                });
            }
        }
        if omega.len() != d || wbar.len() != d {
            return Err(Error::DimMismatch {
                op: "from_parts",
                lhs: (d, 1),
                rhs: (omega.len(), wbar.len()),
            });
        }
        Ok(FactoredOutputLayer {
            v,
            u,
            omega,
            q,
            u_inv_t,
            wbar,
            update_counter: 0,
            config,
            last_stabilize: None,
        })
    }

    #[inline]
    pub fn dim_out(&self) -> usize {
        self.v.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.v.cols()
    }

    pub fn v(&self) -> &DenseMat {
        &self.v
    }

    pub fn u(&self) -> &DenseMat {
        &self.u
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn q(&self) -> &DenseMat {
        &self.q
    }

    pub fn u_inv_t(&self) -> &DenseMat {
        &self.u_inv_t
    }

    pub fn wbar(&self) -> &[f64] {
        &self.wbar
    }

    pub fn update_counter(&self) -> u64 {
        self.update_counter
    }

    pub fn config(&self) -> &StabilizeConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: StabilizeConfig) {
        assert!(config.is_valid(), "invalid stabilize configuration");
        self.config = config;
    }

    /// Report from the most recent automatic stabilization pass, if any;
    /// clears the slot. Intended for callers that log fixed values.
    pub fn take_stabilize_report(&mut self) -> Option<StabilizeReport> {
        self.last_stabilize.take()
    }

    /// The dense `W = V U + 1_D omega^T`. Test and checkpoint utility:
    /// costs O(D d^2), which is exactly what the layer exists to avoid.
    pub fn materialize_w(&self) -> DenseMat {
        let mut w = matmul(&self.v, false, &self.u, false).expect("V U shapes agree");
        for r in 0..w.rows() {
            axpy(w.row_mut(r), &self.omega, 1.0);
        }
        w
    }

    /// Recomputes the tracked transpose-inverse of `U` from scratch.
    pub fn refresh_inverse(&mut self) -> Result<()> {
        self.u_inv_t = invert_square(&self.u)?.transpose();
        Ok(())
    }

    /// D-free forward statistics for a minibatch; `support` provides the
    /// index pattern (its values are ignored). `s` is computed only when
    /// `needs_s` is set and is zero-filled otherwise.
    pub fn forward_stats(
        &self,
        h: &DenseMat,
        support: &KSparseMat,
        needs_s: bool,
    ) -> Result<ForwardStats> {
        self.check_batch_shapes("forward_stats", h, support)?;
        let m = h.cols();
        let h_hat = matmul(&self.q, false, h, false)?;
        let m_hat = matmul(h, true, &h_hat, false)?;
        let q: Vec<f64> = (0..m).map(|j| m_hat.at(j, j)).collect();
        let s = if needs_s { h.matvec_t(&self.wbar) } else { vec![0.0; m] };
        // Row j of h_tilde_t is (U H)'s column j: contiguous for the dot
        // products against V's rows below.
        let h_tilde_t = matmul(h, true, &self.u, true)?;
        let h_omega = h.matvec_t(&self.omega);
        let mut a = Vec::with_capacity(m);
        for (j, &hw) in h_omega.iter().enumerate() {
            let col = support.col(j);
            let mut aj = Vec::with_capacity(col.nnz());
            for &i in col.indices() {
                aj.push(dot(h_tilde_t.row(j), self.v.row(i)) + hw);
            }
            a.push(aj);
        }
        Ok(ForwardStats {
            h_hat,
            m_hat,
            q,
            s,
            h_tilde: h_tilde_t.transpose(),
            h_omega,
            a,
        })
    }

    /// One exact squared-error SGD step for a single example: `h` length d,
    /// `y` K-sparse of dimension D. Returns the loss `|W h - y|^2` and the
    /// upstream gradient `grad_h = 2 W^T (W h - y)`, both for the pre-update
    /// `W`, then advances `V`, `U`, the tracked inverse, `Q`, and `wbar` so
    /// that the new implicit `W` equals `W - 2 eta (W h - y) h^T`.
    ///
    /// Cost O(d^2 + K d): independent of D.
    ///
    /// The squared-error path requires `omega = 0` (it never produces a
    /// `1_D`-direction gradient component, so `omega` stays zero under it).
    pub fn online_mse_update(
        &mut self,
        h: &[f64],
        y: &KSparseVec,
        eta: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let d = self.d();
        assert_eq!(h.len(), d, "h length must equal d");
        self.assert_omega_zero();
        if y.dim() != self.dim_out() {
            return Err(Error::DimMismatch {
                op: "online_mse_update",
                lhs: (self.dim_out(), 1),
                rhs: (y.dim(), 1),
            });
        }
        assert!(eta >= 0.0, "learning rate must be nonnegative");

        let h_hat = self.q.matvec(h); // Q h
        let vt_y = sparse_vec_transpose_times_dense(y, &self.v)?; // V^T y
        let y_hat = self.u.matvec_t(&vt_y); // U^T V^T y = W^T y
        let mut grad_h = vec![0.0; d];
        for i in 0..d {
            grad_h[i] = 2.0 * (h_hat[i] - y_hat[i]);
        }
        let loss = dot(h, &h_hat) - 2.0 * dot(h, &y_hat) + y.norm_sq();
        if eta == 0.0 {
            return Ok((loss, grad_h));
        }

        // U_new = U (I - 2 eta h h^T) is singular iff 2 eta |h|^2 = 1;
        // reject before mutating anything.
        let h_norm_sq = dot(h, h);
        let denom = 1.0 - 2.0 * eta * h_norm_sq;
        if denom.abs() < 1e-12 {
            return Err(Error::SingularUpdate);
        }

        let u_h = self.u.matvec(h); // U h, from the pre-update U
        self.u.add_outer(&u_h, h, -2.0 * eta)?;
        // Sherman-Morrison on the rank-one factor.
        let g = self.u_inv_t.matvec(h);
        self.u_inv_t.add_outer(&g, h, 2.0 * eta / denom)?;
        // V touches only y's K rows, using the *new* inverse.
        let z = self.u_inv_t.matvec(h); // U_new^{-T} h
        scatter_vec_update(&mut self.v, y, &z, 2.0 * eta)?;
        // Q <- Q - eta (h grad_h^T + grad_h h^T) + 4 eta^2 L h h^T.
        self.q.add_outer(h, &grad_h, -eta)?;
        self.q.add_outer(&grad_h, h, -eta)?;
        self.q.add_outer(h, h, 4.0 * eta * eta * loss)?;
        // wbar <- wbar - 2 eta (wbar^T h - sum(y)) h.
        let y_sum: f64 = y.values().iter().sum();
        let coeff = -2.0 * eta * (dot(&self.wbar, h) - y_sum);
        axpy(&mut self.wbar, h, coeff);

        self.after_update()?;
        Ok((loss, grad_h))
    }

    /// One exact squared-error SGD step for a minibatch `H : d x m` with
    /// K-sparse targets `Y : D x m`. Returns the summed loss and
    /// `grad_H = 2 W^T (W H - Y)` for the pre-update `W`, then advances the
    /// state so the new implicit `W` equals `W - 2 eta (W H - Y) H^T`.
    ///
    /// Cost O(m d^2 + m^2 d + m^3 + K m d). The tracked inverse advances by
    /// the Woodbury identity through an m x m solve; when m > d a direct
    /// O(d^3) re-inversion is cheaper and is used instead.
    pub fn minibatch_mse_update(
        &mut self,
        h: &DenseMat,
        y: &KSparseMat,
        eta: f64,
    ) -> Result<(f64, DenseMat)> {
        self.check_batch_shapes("minibatch_mse_update", h, y)?;
        self.assert_omega_zero();
        assert!(eta >= 0.0, "learning rate must be nonnegative");
        let m = h.cols();

        let h_hat = matmul(&self.q, false, h, false)?; // Q H
        let yt_v = sparse_transpose_times_dense(y, &self.v)?; // Y^T V : m x d
        let y_hat = matmul(&self.u, true, &yt_v, true)?; // U^T V^T Y = W^T Y : d x m
        let mut grad_h = h_hat.clone();
        grad_h.add_scaled(&y_hat, -1.0)?;
        grad_h.scale(2.0);

        // M = (O - Y)^T (O - Y) = H^T h_hat - (P + P^T) + Y^T Y.
        let mut m_mat = matmul(h, true, &h_hat, false)?;
        let p = matmul(&y_hat, true, h, false)?; // Y_hat^T H = Y^T O
        for r in 0..m {
            for c in 0..m {
                *m_mat.at_mut(r, c) -= p.at(r, c) + p.at(c, r);
            }
        }
        m_mat.add_scaled(&crate::sparse::sparse_gram(y), 1.0)?;
        let loss = m_mat.trace();
        if eta == 0.0 {
            return Ok((loss, grad_h));
        }

        // Fallible pieces first: new U and its inverse are fully computed
        // before any field is overwritten.
        let u_h = matmul(&self.u, false, h, false)?; // U H, pre-update
        let mut u_new = self.u.clone();
        let step = matmul(&u_h, false, h, true)?;
        u_new.add_scaled(&step, -2.0 * eta)?;

        let u_inv_t_new = if m <= self.d() {
            // Woodbury: U_new^{-T} = U^{-T} - (U^{-T} H) S^{-1} H^T with
            // S = H^T H - (1 / 2 eta) I_m.
            let mut s_mat = matmul(h, true, h, false)?;
            let shift = 1.0 / (2.0 * eta);
            for j in 0..m {
                *s_mat.at_mut(j, j) -= shift;
            }
            let s_inv = invert_square(&s_mat).map_err(|_| Error::SingularUpdate)?;
            let g = matmul(&self.u_inv_t, false, h, false)?; // U^{-T} H
            let t = matmul(&g, false, &s_inv, false)?;
            let corr = matmul(&t, false, h, true)?;
            let mut out = self.u_inv_t.clone();
            out.add_scaled(&corr, -1.0)?;
            out
        } else {
            invert_square(&u_new)
                .map_err(|_| Error::SingularUpdate)?
                .transpose()
        };

        self.u = u_new;
        self.u_inv_t = u_inv_t_new;
        // V <- V + 2 eta Y (U_new^{-T} H)^T, touching K m rows.
        let g_t = matmul(h, true, &self.u_inv_t, true)?; // (U_new^{-T} H)^T : m x d
        scatter_row_update(&mut self.v, y, &g_t, 2.0 * eta)?;
        // Q <- Q - eta (H grad_H^T + grad_H H^T) + 4 eta^2 (H M) H^T.
        let hg = matmul(h, false, &grad_h, true)?;
        self.q.add_scaled(&hg, -eta)?;
        let gh = hg.transpose();
        self.q.add_scaled(&gh, -eta)?;
        let hm = matmul(h, false, &m_mat, false)?;
        let hmh = matmul(&hm, false, h, true)?;
        self.q.add_scaled(&hmh, 4.0 * eta * eta)?;
        // wbar <- wbar - 2 eta H (H^T wbar - colsums(Y)).
        let mut t = h.matvec_t(&self.wbar);
        let y_sums = sparse_column_sums(y);
        for (tj, yj) in t.iter_mut().zip(&y_sums) {
            *tj -= yj;
        }
        let delta = h.matvec(&t);
        axpy(&mut self.wbar, &delta, -2.0 * eta);

        self.after_update()?;
        Ok((loss, grad_h))
    }

    /// One exact SGD step for any spherical loss on a minibatch `H : d x m`
    /// with K-sparse targets. Returns the summed loss and the upstream
    /// gradient `grad_H = 2 h_hat diag(grad_q) + Z` for the pre-update
    /// state, then advances `U`, `omega`, `V`, the tracked inverse, `Q`,
    /// and `wbar` so the implicit `W` follows
    /// `W - eta (2 O diag(grad_q) + 1_D grad_s^T + Yring) H^T` exactly.
    ///
    /// Cost O(m d^2 + m^2 d + m^2 K + m^3 + K m d): independent of D.
    pub fn spherical_update(
        &mut self,
        h: &DenseMat,
        targets: &KSparseMat,
        eta: f64,
        loss: &dyn SphericalLoss,
    ) -> Result<(f64, DenseMat)> {
        self.check_batch_shapes("spherical_update", h, targets)?;
        assert!(eta >= 0.0, "learning rate must be nonnegative");
        let (d, m) = (self.d(), h.cols());
        let needs_s = loss.uses_sum_of_outputs();

        let stats = self.forward_stats(h, targets, needs_s)?;
        let batch = eval_with_grads(loss, &stats.q, &stats.s, targets, &stats.a)?;
        let total_loss = batch.total();

        // ybar_j = sum_k grad_a[k][j]: the column sums of Yring.
        let ybar: Vec<f64> = batch.grad_a.iter().map(|g| g.iter().sum()).collect();
        let yring = targets.replace_values(&batch.grad_a)?;

        // Z = wbar grad_s^T + U^T (V^T Yring) + omega ybar^T  (d x m),
        // all from pre-update state; equals W^T Yring + wbar grad_s^T.
        let yring_t_v = sparse_transpose_times_dense(&yring, &self.v)?; // m x d
        let mut z = matmul(&self.u, true, &yring_t_v, true)?; // U^T V^T Yring
        z.add_outer(&self.wbar, &batch.grad_s, 1.0)?;
        z.add_outer(&self.omega, &ybar, 1.0)?;

        // grad_H = 2 h_hat diag(grad_q) + Z.
        let mut grad_h = stats.h_hat.clone();
        grad_h.scale_cols(&batch.grad_q);
        grad_h.scale(2.0);
        grad_h.add_scaled(&z, 1.0)?;

        if eta == 0.0 {
            return Ok((total_loss, grad_h));
        }

        // U_new = U - 2 eta (U H) diag(grad_q) H^T, computed into a
        // temporary so a singular Woodbury solve leaves state untouched.
        let mut hdq = stats.h_tilde.clone(); // U H
        hdq.scale_cols(&batch.grad_q);
        let step = matmul(&hdq, false, h, true)?;
        let mut u_new = self.u.clone();
        u_new.add_scaled(&step, -2.0 * eta)?;

        let u_inv_t_new = if m <= d {
            // Woodbury without inverting diag(grad_q) (entries may be 0):
            // U_new^{-T} = U^{-T} + 2 eta (U^{-T} H) S^{-1} diag(grad_q) H^T
            // with S = I_m - 2 eta diag(grad_q) H^T H.
            let hth = matmul(h, true, h, false)?;
            let mut s_mat = DenseMat::identity(m);
            for r in 0..m {
                for c in 0..m {
                    *s_mat.at_mut(r, c) -= 2.0 * eta * batch.grad_q[r] * hth.at(r, c);
                }
            }
            let s_inv = invert_square(&s_mat).map_err(|_| Error::SingularUpdate)?;
            let g = matmul(&self.u_inv_t, false, h, false)?; // U^{-T} H
            let mut t = matmul(&g, false, &s_inv, false)?;
            t.scale_cols(&batch.grad_q);
            let corr = matmul(&t, false, h, true)?;
            let mut out = self.u_inv_t.clone();
            out.add_scaled(&corr, 2.0 * eta)?;
            out
        } else {
            invert_square(&u_new)
                .map_err(|_| Error::SingularUpdate)?
                .transpose()
        };

        self.u = u_new;
        self.u_inv_t = u_inv_t_new;

        // omega <- omega - eta H (2 diag(grad_q) h_omega + grad_s).
        let t_vec: Vec<f64> = (0..m)
            .map(|j| 2.0 * batch.grad_q[j] * stats.h_omega[j] + batch.grad_s[j])
            .collect();
        let delta = h.matvec(&t_vec);
        axpy(&mut self.omega, &delta, -eta);

        // V <- V - eta Yring (U_new^{-T} H)^T.
        let g_t = matmul(h, true, &self.u_inv_t, true)?; // m x d
        scatter_row_update(&mut self.v, &yring, &g_t, -eta)?;

        // wbar <- wbar - eta H (2 diag(grad_q) H^T wbar + D grad_s + ybar),
        // reusing s = H^T wbar when the forward pass computed it.
        let ht_wbar = if needs_s { stats.s.clone() } else { h.matvec_t(&self.wbar) };
        let dim = self.dim_out() as f64;
        let t_vec: Vec<f64> = (0..m)
            .map(|j| 2.0 * batch.grad_q[j] * ht_wbar[j] + dim * batch.grad_s[j] + ybar[j])
            .collect();
        let delta = h.matvec(&t_vec);
        axpy(&mut self.wbar, &delta, -eta);

        // M = grad_O^T grad_O, assembled from D-free pieces:
        // 4 Dq m_hat Dq + D grad_s grad_s^T + Yring^T Yring
        //   + grad_s ybar^T + ybar grad_s^T + 2 Dq H^T Z + 2 (Dq H^T Z)^T.
        let mut m_mat = stats.m_hat.clone();
        m_mat.scale_cols(&batch.grad_q);
        for r in 0..m {
            let gq = batch.grad_q[r];
            for x in m_mat.row_mut(r) {
                *x *= gq;
            }
        }
        m_mat.scale(4.0);
        for r in 0..m {
            for c in 0..m {
                *m_mat.at_mut(r, c) += dim * batch.grad_s[r] * batch.grad_s[c]
                    + batch.grad_s[r] * ybar[c]
                    + ybar[r] * batch.grad_s[c];
            }
        }
        m_mat.add_scaled(&crate::sparse::sparse_gram(&yring), 1.0)?;
        let mut htz = matmul(h, true, &z, false)?; // H^T Z : m x m
        for r in 0..m {
            let gq = batch.grad_q[r];
            for x in htz.row_mut(r) {
                *x *= gq;
            }
        }
        let htz_t = htz.transpose();
        m_mat.add_scaled(&htz, 2.0)?;
        m_mat.add_scaled(&htz_t, 2.0)?;

        // Q <- Q - eta grad_H H^T - eta H grad_H^T + eta^2 (H M) H^T.
        let gh = matmul(&grad_h, false, h, true)?;
        self.q.add_scaled(&gh, -eta)?;
        let hg = gh.transpose();
        self.q.add_scaled(&hg, -eta)?;
        let hm = matmul(h, false, &m_mat, false)?;
        let hmh = matmul(&hm, false, h, true)?;
        self.q.add_scaled(&hmh, eta * eta)?;

        self.after_update()?;
        Ok((total_loss, grad_h))
    }

    fn check_batch_shapes(
        &self,
        op: &'static str,
        h: &DenseMat,
        targets: &KSparseMat,
    ) -> Result<()> {
        if h.rows() != self.d() {
            return Err(Error::DimMismatch {
                op,
                lhs: (self.d(), 1),
                rhs: (h.rows(), h.cols()),
            });
        }
        if targets.dim_rows() != self.dim_out() || targets.n_cols() != h.cols() {
            return Err(Error::DimMismatch {
                op,
                lhs: (self.dim_out(), h.cols()),
                rhs: (targets.dim_rows(), targets.n_cols()),
            });
        }
        Ok(())
    }

    fn assert_omega_zero(&self) {
        assert!(
            self.omega.iter().all(|&x| x == 0.0),
            "squared-error paths require omega = 0; use spherical_update after \
             a general-loss step has made omega nonzero"
        );
    }

    /// Bookkeeping after a committed update: counts it and, every
    /// `n_check` updates, refreshes the tracked inverse and runs a
    /// stabilization pass (whose report is kept for polling).
    fn after_update(&mut self) -> Result<()> {
        self.update_counter += 1;
        if self.update_counter.is_multiple_of(self.config.n_check as u64) {
            let report = singular_stabilize(self)?;
            self.last_stabilize = Some(report);
        }
        Ok(())
    }
}
