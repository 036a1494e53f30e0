//! Minimal feed-forward network around the output layers: a sparse input
//! layer (O(Kd) forward/update instead of O(Dd)), dense hidden layers, and
//! either output-layer implementation behind one handle.
//!
//! The point of the module is the end-to-end claim: two networks seeded
//! identically, one with the factored output layer and one with the dense
//! reference layer, follow the same learning curve step for step, because
//! the factored updates reproduce dense SGD exactly.
//!
//! The output layer consumes the last hidden activation with a constant-1
//! row appended, so the output bias lives inside `W`'s last column and
//! needs no separate code path.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::factored::FactoredOutputLayer;
use crate::loss::SphericalLoss;
use crate::mat::{axpy, matmul, DenseMat};
use crate::naive::NaiveOutputLayer;
use crate::sparse::{
    scatter_row_update, scatter_vec_update, sparse_transpose_times_dense,
    sparse_vec_transpose_times_dense, KSparseMat, KSparseVec,
};
use crate::stabilize::{StabilizeConfig, StabilizeReport};

/// Elementwise nonlinearity for hidden activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlin {
    Tanh,
    /// No-op; used for strictly linear equivalence tests.
    Identity,
}

impl Nonlin {
    fn apply_mat(&self, a: &mut DenseMat) {
        if let Nonlin::Tanh = self {
            for v in a.data_mut() {
                *v = libm::tanh(*v);
            }
        }
    }

    /// Derivative expressed through the *output* h = f(a):
    /// tanh'(a) = 1 - h^2, identity' = 1.
    #[inline]
    fn derivative_from_output(&self, h: f64) -> f64 {
        match self {
            Nonlin::Tanh => 1.0 - h * h,
            Nonlin::Identity => 1.0,
        }
    }
}

/// First layer: dense weights consumed by K-sparse inputs, so forward and
/// update both touch only the K active rows.
#[derive(Debug, Clone)]
pub struct SparseInputLayer {
    /// D_in x d1.
    pub w1: DenseMat,
    /// Length d1.
    pub b1: Vec<f64>,
}

impl SparseInputLayer {
    pub fn new(w1: DenseMat, b1: Vec<f64>) -> Result<Self> {
        if b1.len() != w1.cols() {
            return Err(Error::DimMismatch {
                op: "SparseInputLayer::new",
                lhs: (w1.rows(), w1.cols()),
                rhs: (b1.len(), 1),
            });
        }
        Ok(SparseInputLayer { w1, b1 })
    }

    #[inline]
    pub fn dim_in(&self) -> usize {
        self.w1.rows()
    }

    #[inline]
    pub fn dim_out(&self) -> usize {
        self.w1.cols()
    }

    /// Pre-activations `W1^T x + b1` for one sparse example: O(K d1).
    pub fn forward_vec(&self, x: &KSparseVec) -> Result<Vec<f64>> {
        let mut a = sparse_vec_transpose_times_dense(x, &self.w1)?;
        axpy(&mut a, &self.b1, 1.0);
        Ok(a)
    }

    /// Pre-activations for a batch `X : D_in x m`, returned as d1 x m.
    pub fn forward(&self, x: &KSparseMat) -> Result<DenseMat> {
        let xt_w = sparse_transpose_times_dense(x, &self.w1)?; // m x d1
        let mut a = xt_w.transpose(); // d1 x m
        for r in 0..a.rows() {
            let br = self.b1[r];
            for v in a.row_mut(r) {
                *v += br;
            }
        }
        Ok(a)
    }

    /// SGD step `W1 -= eta x grad_a^T`, `b1 -= eta grad_a`, touching only
    /// x's active rows of `W1`.
    pub fn update_vec(&mut self, x: &KSparseVec, grad_a: &[f64], eta: f64) -> Result<()> {
        if grad_a.len() != self.dim_out() {
            return Err(Error::DimMismatch {
                op: "SparseInputLayer::update_vec",
                lhs: (self.dim_out(), 1),
                rhs: (grad_a.len(), 1),
            });
        }
        if eta == 0.0 {
            return Ok(());
        }
        scatter_vec_update(&mut self.w1, x, grad_a, -eta)?;
        axpy(&mut self.b1, grad_a, -eta);
        Ok(())
    }

    /// Batch SGD step: `W1 -= eta X grad_A^T` (K m rows touched), and
    /// `b1 -= eta * rowsums(grad_A)`.
    pub fn update(&mut self, x: &KSparseMat, grad_a: &DenseMat, eta: f64) -> Result<()> {
        if grad_a.rows() != self.dim_out() || grad_a.cols() != x.n_cols() {
            return Err(Error::DimMismatch {
                op: "SparseInputLayer::update",
                lhs: (self.dim_out(), x.n_cols()),
                rhs: (grad_a.rows(), grad_a.cols()),
            });
        }
        if eta == 0.0 {
            return Ok(());
        }
        let grad_a_t = grad_a.transpose(); // m x d1
        scatter_row_update(&mut self.w1, x, &grad_a_t, -eta)?;
        let row_sums: Vec<f64> = (0..grad_a.rows())
            .map(|r| grad_a.row(r).iter().sum())
            .collect();
        axpy(&mut self.b1, &row_sums, -eta);
        Ok(())
    }
}

/// One dense hidden layer `h_out = f(W^T h_in + b)` with `W : n_in x n_out`.
#[derive(Debug, Clone)]
pub struct HiddenLayer {
    pub w: DenseMat,
    pub b: Vec<f64>,
    pub nonlin: Nonlin,
}

/// Output-layer handle: the factored implementation or the dense reference,
/// behind one update interface so networks differ in nothing else.
/// One instance per network, so the variant size gap is irrelevant.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum OutputLayer {
    Factored(FactoredOutputLayer),
    Naive(NaiveOutputLayer),
}

impl OutputLayer {
    pub fn d(&self) -> usize {
        match self {
            OutputLayer::Factored(l) => l.d(),
            OutputLayer::Naive(l) => l.d(),
        }
    }

    pub fn dim_out(&self) -> usize {
        match self {
            OutputLayer::Factored(l) => l.dim_out(),
            OutputLayer::Naive(l) => l.dim_out(),
        }
    }

    /// One SGD step; returns (summed loss, grad wrt the layer input), both
    /// for the pre-update weights.
    pub fn update(
        &mut self,
        h: &DenseMat,
        y: &KSparseMat,
        eta: f64,
        loss: &dyn SphericalLoss,
    ) -> Result<(f64, DenseMat)> {
        match self {
            OutputLayer::Factored(l) => l.spherical_update(h, y, eta, loss),
            OutputLayer::Naive(l) => l.naive_spherical_step(h, y, eta, loss),
        }
    }

    /// The dense W (materialized for the factored case). Test and
    /// checkpoint utility.
    pub fn dense_weights(&self) -> DenseMat {
        match self {
            OutputLayer::Factored(l) => l.materialize_w(),
            OutputLayer::Naive(l) => l.w().clone(),
        }
    }
}

/// Which output-layer implementation a new network gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Factored,
    Naive,
}

/// Sparse input layer, dense hidden chain, output layer.
#[derive(Debug, Clone)]
pub struct MlpStack {
    input: SparseInputLayer,
    input_nonlin: Nonlin,
    hidden: Vec<HiddenLayer>,
    output: OutputLayer,
}

impl MlpStack {
    /// Fresh network. `dims` are the hidden widths `[d1, d2, ..., p]`
    /// (at least one); the output layer has `d = p + 1` for the appended
    /// constant-1 row. All weights are uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` from one seeded stream, biases
    /// zero; two calls with equal seeds and different `output` kinds yield
    /// bit-identical initial weights (the twin-network setup).
    pub fn new(
        dim_in: usize,
        dims: &[usize],
        dim_out: usize,
        nonlin: Nonlin,
        output: OutputKind,
        seed: u64,
    ) -> Result<Self> {
        assert!(!dims.is_empty(), "at least one hidden width required");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform_mat = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            DenseMat::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
        };

        let input = SparseInputLayer::new(uniform_mat(dim_in, dims[0], dim_in), vec![0.0; dims[0]])?;
        let mut hidden = Vec::new();
        for win in dims.windows(2) {
            hidden.push(HiddenLayer {
                w: uniform_mat(win[0], win[1], win[0]),
                b: vec![0.0; win[1]],
                nonlin,
            });
        }
        let d = dims[dims.len() - 1] + 1;
        let w_out = uniform_mat(dim_out, d, d);
        let output = match output {
            OutputKind::Naive => OutputLayer::Naive(NaiveOutputLayer::new(w_out)),
            OutputKind::Factored => {
                let q = matmul(&w_out, true, &w_out, false)?;
                let ones = vec![1.0; dim_out];
                let wbar = w_out.matvec_t(&ones);
                let layer = FactoredOutputLayer::from_parts(
                    w_out,
                    DenseMat::identity(d),
                    vec![0.0; d],
                    q,
                    DenseMat::identity(d),
                    wbar,
                    StabilizeConfig::default(),
                )?;
                OutputLayer::Factored(layer)
            }
        };
        MlpStack::from_parts(input, nonlin, hidden, output)
    }

    /// Assembles a network from explicit layers (checkpoint restore),
    /// validating that consecutive dimensions agree and that the output
    /// layer expects the last hidden width plus the constant-1 row.
    pub fn from_parts(
        input: SparseInputLayer,
        input_nonlin: Nonlin,
        hidden: Vec<HiddenLayer>,
        output: OutputLayer,
    ) -> Result<Self> {
        let mut width = input.dim_out();
        for (k, layer) in hidden.iter().enumerate() {
            if layer.w.rows() != width || layer.b.len() != layer.w.cols() {
                let _ = k;
                return Err(Error::DimMismatch {
                    op: "MlpStack::from_parts",
                    lhs: (width, layer.w.cols()),
                    rhs: (layer.w.rows(), layer.b.len()),
                });
            }
            width = layer.w.cols();
        }
        if output.d() != width + 1 {
            return Err(Error::DimMismatch {
                op: "MlpStack::from_parts",
                lhs: (width + 1, 1),
                rhs: (output.d(), 1),
            });
        }
        Ok(MlpStack { input, input_nonlin, hidden, output })
    }

    pub fn input(&self) -> &SparseInputLayer {
        &self.input
    }

    pub fn input_nonlin(&self) -> Nonlin {
        self.input_nonlin
    }

    pub fn hidden(&self) -> &[HiddenLayer] {
        &self.hidden
    }

    pub fn output(&self) -> &OutputLayer {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut OutputLayer {
        &mut self.output
    }

    /// Stabilization report from the factored output layer's most recent
    /// automatic pass, if any (always None for the dense reference).
    pub fn take_stabilize_report(&mut self) -> Option<StabilizeReport> {
        match &mut self.output {
            OutputLayer::Factored(l) => l.take_stabilize_report(),
            OutputLayer::Naive(_) => None,
        }
    }

    /// One SGD step on a minibatch: forward through the hidden chain,
    /// output-layer update (which returns the loss and the gradient at its
    /// input for the pre-update weights), then standard backpropagation and
    /// SGD on every hidden/input parameter. With `eta = 0` nothing is
    /// mutated and the returned value is a pure loss evaluation.
    pub fn train_step(
        &mut self,
        x: &KSparseMat,
        y: &KSparseMat,
        eta: f64,
        loss: &dyn SphericalLoss,
    ) -> Result<f64> {
        assert!(x.n_cols() >= 1, "batch must be nonempty");
        if x.dim_rows() != self.input.dim_in() || y.n_cols() != x.n_cols() {
            return Err(Error::DimMismatch {
                op: "train_step",
                lhs: (self.input.dim_in(), x.n_cols()),
                rhs: (x.dim_rows(), y.n_cols()),
            });
        }

        // Forward; hs[k] is the k-th activation (post-nonlinearity).
        let mut hs: Vec<DenseMat> = Vec::with_capacity(self.hidden.len() + 1);
        let mut a = self.input.forward(x)?;
        self.input_nonlin.apply_mat(&mut a);
        hs.push(a);
        for layer in &self.hidden {
            let mut a = matmul(&layer.w, true, hs.last().unwrap(), false)?;
            for r in 0..a.rows() {
                let br = layer.b[r];
                for v in a.row_mut(r) {
                    *v += br;
                }
            }
            layer.nonlin.apply_mat(&mut a);
            hs.push(a);
        }

        let h_ext = append_ones_row(hs.last().unwrap());
        let (total_loss, grad_ext) = self.output.update(&h_ext, y, eta, loss)?;
        // The constant-1 row has no upstream parameters; drop its gradient.
        let mut grad = drop_last_row(&grad_ext);

        for idx in (0..self.hidden.len()).rev() {
            let nonlin = self.hidden[idx].nonlin;
            let h_out = &hs[idx + 1];
            for r in 0..grad.rows() {
                for c in 0..grad.cols() {
                    *grad.at_mut(r, c) *= nonlin.derivative_from_output(h_out.at(r, c));
                }
            }
            let grad_prev = matmul(&self.hidden[idx].w, false, &grad, false)?;
            if eta != 0.0 {
                let gw = matmul(&hs[idx], false, &grad, true)?;
                self.hidden[idx].w.add_scaled(&gw, -eta)?;
                let row_sums: Vec<f64> =
                    (0..grad.rows()).map(|r| grad.row(r).iter().sum()).collect();
                axpy(&mut self.hidden[idx].b, &row_sums, -eta);
            }
            grad = grad_prev;
        }

        let h0 = &hs[0];
        for r in 0..grad.rows() {
            for c in 0..grad.cols() {
                *grad.at_mut(r, c) *= self.input_nonlin.derivative_from_output(h0.at(r, c));
            }
        }
        self.input.update(x, &grad, eta)?;

        Ok(total_loss)
    }
}

fn append_ones_row(h: &DenseMat) -> DenseMat {
    let (p, m) = (h.rows(), h.cols());
    DenseMat::from_fn(p + 1, m, |r, c| if r < p { h.at(r, c) } else { 1.0 })
}

fn drop_last_row(g: &DenseMat) -> DenseMat {
    let (p1, m) = (g.rows(), g.cols());
    DenseMat::from_fn(p1 - 1, m, |r, c| g.at(r, c))
}
