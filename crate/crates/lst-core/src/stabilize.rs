//! Conditioning maintenance for the `U` factor.
//!
//! SGD on the factorization drives `U`'s spectrum around even when the
//! implicit `W` is perfectly tame, and the tracked inverse loses accuracy
//! as cond(U) grows. The remedies here all leave the materialized `W`
//! invariant:
//!
//! - [`restore_pristine`]: fold `U` into `V` and reset `U = I`. O(D d^2),
//!   the sledgehammer.
//! - [`fix_singular_value`]: move one singular value of `U` to a target by
//!   a rank-one update of `U`, with exact rank-one compensation of `V` and
//!   the tracked inverse. O(D d).
//! - [`singular_stabilize`]: scan the spectrum (full SVD, or power
//!   iteration for the two extremes) and fix every value outside the safe
//!   range. This is what the layer runs automatically every
//!   `n_check` updates, after refreshing the tracked inverse.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::factored::FactoredOutputLayer;
use crate::mat::{
    axpy, matmul, norm, power_iteration_extremes, svd_square, DenseMat, SingularExtremes,
};

/// Scan strategy for [`singular_stabilize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One Jacobi SVD, fix every out-of-range value. O(d^3) but exact.
    FullSvd,
    /// Power iteration for the extreme values only, rescanning after each
    /// fix until both extremes are in range. Cheaper; the default.
    PowerScan,
}

/// Safe range and cadence for automatic stabilization.
#[derive(Debug, Clone, Copy)]
pub struct StabilizeConfig {
    /// Lower edge of the safe singular-value range.
    pub sigma_low: f64,
    /// Upper edge of the safe singular-value range.
    pub sigma_high: f64,
    /// Out-of-range values are moved here.
    pub sigma_target: f64,
    /// A stabilization pass runs every `n_check` committed updates.
    pub n_check: usize,
    /// Power-iteration count per extreme-value scan.
    pub power_iters: usize,
    pub strategy: Strategy,
}

impl Default for StabilizeConfig {
    fn default() -> Self {
        StabilizeConfig {
            sigma_low: 0.001,
            sigma_high: 100.0,
            sigma_target: 1.0,
            n_check: 100,
            power_iters: 100,
            strategy: Strategy::PowerScan,
        }
    }
}

impl StabilizeConfig {
    /// Structural validity: 0 < sigma_low < 1 < sigma_high, the target
    /// strictly inside the range (otherwise the scan loop cannot
    /// terminate), and positive cadence/iteration counts.
    pub fn is_valid(&self) -> bool {
        self.sigma_low > 0.0
            && self.sigma_low < 1.0
            && self.sigma_high > 1.0
            && self.sigma_target > self.sigma_low
            && self.sigma_target < self.sigma_high
            && self.sigma_low.is_finite()
            && self.sigma_high.is_finite()
            && self.sigma_target.is_finite()
            && self.n_check >= 1
            && self.power_iters >= 1
    }
}

/// What a stabilization pass did.
#[derive(Debug, Clone)]
pub struct StabilizeReport {
    /// Each fixed value as (before, after), in fix order.
    pub values_fixed: Vec<(f64, f64)>,
    /// cond(U) = sigma_max / sigma_min seen at scan start.
    pub cond_before: f64,
    /// cond(U) after all fixes (equals `cond_before` when nothing was fixed).
    pub cond_after: f64,
}

/// Folds `U` into `V` and resets `U` (and its tracked inverse) to the
/// identity: `V <- V U`, leaving `W = V U + 1_D omega^T` invariant and
/// cond(U) exactly 1. `omega` is untouched.
///
/// Costs O(D d^2), so this is an occasional reset, not a per-step tool. At
/// the same cost, `Q` and `wbar` are recomputed from the now-explicit `W`,
/// clearing any accumulated bookkeeping drift.
pub fn restore_pristine(layer: &mut FactoredOutputLayer) {
    let d = layer.d();
    let vu = matmul(&layer.v, false, &layer.u, false).expect("V U shapes agree");
    layer.v = vu;
    layer.u = DenseMat::identity(d);
    layer.u_inv_t = DenseMat::identity(d);

    // Drift reset: with U = I the dense W is V plus the omega offset.
    let mut w = layer.v.clone();
    for r in 0..w.rows() {
        axpy(w.row_mut(r), &layer.omega, 1.0);
    }
    layer.q = matmul(&w, true, &w, false).expect("W^T W shapes agree");
    let ones = vec![1.0; w.rows()];
    layer.wbar = w.matvec_t(&ones);
}

/// Moves the singular value `sigma` of `U` (with unit left singular vector
/// `u`) to `sigma_target` by a rank-one update, compensating `V` and the
/// tracked inverse so `V U` is exactly invariant:
///
/// with `alpha = (target - sigma) / sigma` and `beta = -alpha / (1 + alpha)`,
/// `U += alpha u (U^T u)^T`, `V += beta (V u) u^T`,
/// `u_inv_t += beta u (U^{-1} u)^T`.
///
/// The `V U` invariance holds for *any* unit `u` (the update is a similarity
/// compensation, not a spectral argument), so approximate vectors from
/// power iteration are safe; only the accuracy of the value placement
/// depends on `u` being a true singular vector.
pub fn fix_singular_value(
    layer: &mut FactoredOutputLayer,
    sigma: f64,
    u: &[f64],
    sigma_target: f64,
) -> Result<()> {
    assert_eq!(u.len(), layer.d(), "direction length must equal d");
    debug_assert!(
        (norm(u) - 1.0).abs() <= 1e-8,
        "fix_singular_value needs a unit direction"
    );
    if sigma <= 1e-300 {
        return Err(Error::DegenerateValue);
    }
    let alpha = (sigma_target - sigma) / sigma;
    if 1.0 + alpha <= 1e-12 {
        return Err(Error::DegenerateValue);
    }
    let beta = -alpha / (1.0 + alpha);

    // All three reads use the pre-update state; mutate only afterwards.
    let ut_u = layer.u.matvec_t(u); // U^T u
    let v_u = layer.v.matvec(u); // V u
    let uinv_u = layer.u_inv_t.matvec_t(u); // U^{-1} u

    layer.u.add_outer(u, &ut_u, alpha)?;
    layer.v.add_outer(&v_u, u, beta)?;
    layer.u_inv_t.add_outer(u, &uinv_u, beta)?;
    Ok(())
}

/// Refreshes the tracked inverse, scans `U`'s spectrum per the layer's
/// configured strategy, and fixes every singular value outside
/// `[sigma_low, sigma_high]` to `sigma_target`. `W`, `Q`, and `wbar` are
/// untouched (each fix preserves `V U` exactly).
///
/// When nothing is out of range, `V`, `U`, and `omega` are bit-identical
/// afterwards; only the tracked inverse has been recomputed.
pub fn singular_stabilize(layer: &mut FactoredOutputLayer) -> Result<StabilizeReport> {
    let cfg = *layer.config();
    assert!(cfg.is_valid(), "invalid stabilize configuration");
    layer.refresh_inverse()?;
    match cfg.strategy {
        Strategy::FullSvd => stabilize_full_svd(layer, &cfg),
        Strategy::PowerScan => stabilize_power_scan(layer, &cfg),
    }
}

fn cond_of(values: &[f64]) -> f64 {
    let hi = values.first().copied().unwrap_or(0.0);
    let lo = values.last().copied().unwrap_or(0.0);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn stabilize_full_svd(
    layer: &mut FactoredOutputLayer,
    cfg: &StabilizeConfig,
) -> Result<StabilizeReport> {
    let svd = svd_square(&layer.u)?;
    let cond_before = cond_of(&svd.singular_values);
    let mut values_fixed = Vec::new();
    // A rank-one fix along an exact left vector changes only that one
    // singular triple, so every fix can reuse this single decomposition.
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma < cfg.sigma_low || sigma > cfg.sigma_high {
            let u_vec = svd.left_vectors.col(k);
            fix_singular_value(layer, sigma, &u_vec, cfg.sigma_target)?;
            values_fixed.push((sigma, cfg.sigma_target));
        }
    }
    let cond_after = if values_fixed.is_empty() {
        cond_before
    } else {
        cond_of(&svd_square(&layer.u)?.singular_values)
    };
    Ok(StabilizeReport { values_fixed, cond_before, cond_after })
}

fn stabilize_power_scan(
    layer: &mut FactoredOutputLayer,
    cfg: &StabilizeConfig,
) -> Result<StabilizeReport> {
    // Each fix lands its value at the target, so at most d values can sit
    // below range plus d above; the cap only guards against pathological
    // non-convergence of the approximate scan.
    let max_fixes = 4 * layer.d();
    let mut values_fixed: Vec<(f64, f64)> = Vec::new();
    let mut cond_before = None;
    loop {
        let extremes = scanned_extremes(layer, cfg)?;
        let cond = extremes.sigma_max / extremes.sigma_min;
        if cond_before.is_none() {
            cond_before = Some(cond);
        }
        if values_fixed.len() < max_fixes && extremes.sigma_min < cfg.sigma_low {
            fix_singular_value(layer, extremes.sigma_min, &extremes.u_min, cfg.sigma_target)?;
            values_fixed.push((extremes.sigma_min, cfg.sigma_target));
            continue;
        }
        if values_fixed.len() < max_fixes && extremes.sigma_max > cfg.sigma_high {
            fix_singular_value(layer, extremes.sigma_max, &extremes.u_max, cfg.sigma_target)?;
            values_fixed.push((extremes.sigma_max, cfg.sigma_target));
            continue;
        }
        return Ok(StabilizeReport {
            values_fixed,
            cond_before: cond_before.unwrap_or(cond),
            cond_after: cond,
        });
    }
}

/// Power-iteration scan that insists on converged directions: a candidate
/// pair is accepted once its Rayleigh residual `|U U^T u - sigma^2 u|` is
/// within 1e-3 of `sigma^2`, doubling the iteration count otherwise. After
/// ten rounds the best estimate is used anyway; the fix is W-invariant for
/// any unit direction and the rescan loop cleans up misplaced values.
fn scanned_extremes(
    layer: &FactoredOutputLayer,
    cfg: &StabilizeConfig,
) -> Result<SingularExtremes> {
    let u_inv = layer.u_inv_t().transpose();
    let mut iters = cfg.power_iters;
    let mut extremes = power_iteration_extremes(layer.u(), &u_inv, iters)?;
    for _ in 0..10 {
        let ok_max = rayleigh_residual(layer, extremes.sigma_max, &extremes.u_max) <= 1e-3;
        let ok_min = rayleigh_residual(layer, extremes.sigma_min, &extremes.u_min) <= 1e-3;
        if ok_max && ok_min {
            break;
        }
        iters *= 2;
        extremes = power_iteration_extremes(layer.u(), &u_inv, iters)?;
    }
    Ok(extremes)
}

/// Relative residual of `(sigma, u)` as a left singular pair of `U`.
fn rayleigh_residual(layer: &FactoredOutputLayer, sigma: f64, u: &[f64]) -> f64 {
    let sigma_sq = sigma * sigma;
    if sigma_sq <= 1e-300 {
        return f64::INFINITY;
    }
    let y = layer.u().matvec_t(u);
    let mut z = layer.u().matvec(&y); // U U^T u
    axpy(&mut z, u, -sigma_sq);
    norm(&z) / sigma_sq
}

/// cond(U) measured honestly by an independent SVD; test and demo utility.
pub fn measured_condition(layer: &FactoredOutputLayer) -> Result<f64> {
    let svd = svd_square(layer.u())?;
    Ok(cond_of(&svd.singular_values))
}
