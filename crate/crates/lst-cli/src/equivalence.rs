//! Twin-trajectory equivalence: run the factored layer and the dense naive
//! layer on identical data and measure how far the two trajectories drift.
//!
//! Both layers start from the same dense weights (the naive twin is built
//! from the factored layer's materialized W), see the same minibatches in the
//! same order, and use the same learning rate. In exact arithmetic the
//! trajectories coincide; in floats they differ only by round-off, so the
//! reported deviations stay many orders of magnitude below any meaningful
//! tolerance as long as the learning rate is in the stable regime.

use std::io::Write;

use anyhow::Result;
use lst_core::{
    DenseMat, FactoredOutputLayer, KSparseMat, NaiveOutputLayer, SquaredError, SyntheticSpec,
    VInit, ValueDist,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Which update path the twins exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivLoss {
    /// Dedicated squared-error entry points on both sides.
    Mse,
    /// The general spherical path, instantiated with squared error.
    SphericalMse,
}

#[derive(Debug, Clone, Copy)]
pub struct EquivSpec {
    pub dim_out: usize,
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub steps: usize,
    pub eta: f64,
    pub seed: u64,
    pub loss: EquivLoss,
}

/// Deviations measured after one step. The first three compare the twins;
/// the last three check the factored layer's bookkeeping against its own
/// materialized W (dense recomputation as the oracle).
#[derive(Debug, Clone, Copy)]
pub struct StepDeviation {
    /// Relative Frobenius deviation of materialized W vs the naive twin.
    pub w: f64,
    /// Relative deviation of the step's total loss.
    pub loss: f64,
    /// Max-abs deviation of the upstream gradient, relative to its scale.
    pub grad_h: f64,
    /// Q vs W^T W, relative Frobenius.
    pub q: f64,
    /// wbar vs column sums of W, relative max-abs.
    pub wbar: f64,
    /// U_inv_T^T U vs identity, max-abs.
    pub inv: f64,
}

pub struct EquivRun {
    pub per_step: Vec<StepDeviation>,
    pub factored: FactoredOutputLayer,
    pub naive: NaiveOutputLayer,
}

fn frob(m: &DenseMat) -> f64 {
    m.data().iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_frob_dev(a: &DenseMat, b: &DenseMat) -> f64 {
    let mut diff = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        diff += (x - y) * (x - y);
    }
    diff.sqrt() / frob(b).max(1.0)
}

fn rel_max_abs_dev(a: &DenseMat, b: &DenseMat) -> f64 {
    let scale = b.data().iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    a.max_abs_diff(b) / scale
}

fn bookkeeping_deviation(layer: &FactoredOutputLayer) -> (f64, f64, f64) {
    let w = layer.materialize_w();
    let wtw = lst_core::mat::matmul(&w, true, &w, false).expect("W^T W");
    let q_dev = rel_frob_dev(layer.q(), &wtw);

    let mut col_sums = vec![0.0; w.cols()];
    for i in 0..w.rows() {
        for (j, sum) in col_sums.iter_mut().enumerate() {
            *sum += w.at(i, j);
        }
    }
    let scale = col_sums.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let wbar_dev = layer
        .wbar()
        .iter()
        .zip(&col_sums)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
        / scale;

    let prod = lst_core::mat::matmul(layer.u_inv_t(), true, layer.u(), false).expect("Uinv^T U");
    let eye = DenseMat::identity(w.cols());
    let inv_dev = prod.max_abs_diff(&eye);
    (q_dev, wbar_dev, inv_dev)
}

/// Run both twins for `spec.steps` minibatches and record per-step deviations.
pub fn run_twins(spec: &EquivSpec) -> Result<EquivRun> {
    let scale = 1.0 / (spec.d as f64).sqrt();
    let mut factored =
        FactoredOutputLayer::init(spec.dim_out, spec.d, VInit::Random { seed: spec.seed, scale });
    let mut naive = NaiveOutputLayer::new(factored.materialize_w());

    if spec.steps == 0 {
        return Ok(EquivRun { per_step: Vec::new(), factored, naive });
    }

    // H entries ~ N(0, 1/d) keep column norms near 1 regardless of d; the
    // target stream reuses the synthetic generator (its X side is unused).
    let mut h_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x9E37_79B9));
    let mut targets = lst_core::generate_synthetic(&SyntheticSpec {
        dim_in: spec.dim_out,
        dim_out: spec.dim_out,
        d_hint: spec.d,
        k: spec.k,
        m: spec.m,
        examples: spec.steps * spec.m,
        seed: spec.seed.wrapping_add(0x517C_C1B7),
        values: ValueDist::Gaussian,
    });

    let mut per_step = Vec::with_capacity(spec.steps);
    for _ in 0..spec.steps {
        let h = DenseMat::from_fn(spec.d, spec.m, |_, _| {
            scale * h_rng.sample::<f64, _>(StandardNormal)
        });
        let (_, y): (KSparseMat, KSparseMat) = targets.next().expect("target stream exhausted");

        let ((lf, gf), (ln, gn)) = match spec.loss {
            EquivLoss::Mse => (
                factored.minibatch_mse_update(&h, &y, spec.eta)?,
                naive.naive_mse_step(&h, &y, spec.eta)?,
            ),
            EquivLoss::SphericalMse => (
                factored.spherical_update(&h, &y, spec.eta, &SquaredError)?,
                naive.naive_spherical_step(&h, &y, spec.eta, &SquaredError)?,
            ),
        };

        let (q, wbar, inv) = bookkeeping_deviation(&factored);
        per_step.push(StepDeviation {
            w: rel_frob_dev(&factored.materialize_w(), naive.w()),
            loss: (lf - ln).abs() / ln.abs().max(1.0),
            grad_h: rel_max_abs_dev(&gf, &gn),
            q,
            wbar,
            inv,
        });
    }
    Ok(EquivRun { per_step, factored, naive })
}

/// Print per-step and overall deviations; exit 0 iff every twin deviation
/// (W, loss, grad) stays within `tol`.
pub fn cmd_equivalence(spec: &EquivSpec, tol: f64, out: &mut dyn Write) -> Result<i32> {
    let run = run_twins(spec)?;
    writeln!(out, "step,w_dev,loss_dev,grad_h_dev")?;
    let (mut w_max, mut l_max, mut g_max) = (0.0f64, 0.0f64, 0.0f64);
    for (i, dev) in run.per_step.iter().enumerate() {
        writeln!(out, "{},{:e},{:e},{:e}", i + 1, dev.w, dev.loss, dev.grad_h)?;
        w_max = w_max.max(dev.w);
        l_max = l_max.max(dev.loss);
        g_max = g_max.max(dev.grad_h);
    }
    writeln!(out, "overall,{:e},{:e},{:e}", w_max, l_max, g_max)?;
    Ok(if w_max <= tol && l_max <= tol && g_max <= tol { 0 } else { 1 })
}
