//! Stabilization demo: deliberately drive U ill-conditioned, then restore it
//! and show that the materialized W is untouched.
//!
//! The drive phase repeats an online squared-error update with an aggressive
//! learning rate on the same unit input h = e1 and an all-zero target. Each
//! such step right-multiplies U by (I - 2 eta h h^T), shrinking one singular
//! direction by the factor |1 - 2 eta| per step while leaving the rest of
//! the identity-initialized U alone, so the condition number grows
//! geometrically and hits any requested level in a handful of steps. The
//! stabilizer is then asked to move every out-of-range singular value back
//! to its target; because each fix is a VU-invariant rank-one pair, the
//! materialized W must not move beyond round-off.

use std::io::Write;

use anyhow::Result;
use lst_core::stabilize::{measured_condition, singular_stabilize};
use lst_core::{FactoredOutputLayer, KSparseVec, StabilizeConfig, Strategy, VInit};

#[derive(Debug, Clone, Copy)]
pub struct StabDemoSpec {
    pub d: usize,
    pub steps: usize,
    pub eta_large: f64,
    pub strategy: Strategy,
}

#[derive(Debug, Clone)]
pub struct StabDemoOutcome {
    pub cond_before: f64,
    pub cond_after: f64,
    pub w_drift: f64,
    pub fixes: Vec<(f64, f64)>,
    /// drift <= 1e-6 and the post-fix condition number within the
    /// configured range bound.
    pub pass: bool,
}

/// Output dimension of the demo layer; the demo's point is conditioning, so
/// a small multiple of d keeps the materialization checks instant.
fn demo_dim_out(d: usize) -> usize {
    8 * d
}

pub fn run_stab_demo(spec: &StabDemoSpec, log: &mut dyn Write) -> Result<StabDemoOutcome> {
    let scale = 1.0 / (spec.d as f64).sqrt();
    let mut layer = FactoredOutputLayer::init(
        demo_dim_out(spec.d),
        spec.d,
        VInit::Random { seed: 0x5EED, scale },
    );
    // No automatic passes during the drive; the demo stabilizes explicitly.
    layer.set_config(StabilizeConfig {
        n_check: usize::MAX,
        strategy: spec.strategy,
        ..StabilizeConfig::default()
    });

    let mut h = vec![0.0; spec.d];
    h[0] = 1.0;
    let zero_target = KSparseVec::empty(demo_dim_out(spec.d));
    for _ in 0..spec.steps {
        layer.online_mse_update(&h, &zero_target, spec.eta_large)?;
    }

    let w_before = layer.materialize_w();
    let cond_before = measured_condition(&layer)?;
    let report = singular_stabilize(&mut layer)?;
    let cond_after = measured_condition(&layer)?;
    let w_after = layer.materialize_w();

    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in w_after.data().iter().zip(w_before.data()) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    let w_drift = num.sqrt() / den.sqrt().max(1.0);

    for (before, after) in &report.values_fixed {
        writeln!(log, "stabilize fixed sigma={:e} -> {:e}", before, after)?;
    }
    if report.values_fixed.is_empty() {
        writeln!(log, "already stable")?;
    }
    writeln!(log, "cond_before={:e}", cond_before)?;
    writeln!(log, "cond_after={:e}", cond_after)?;
    writeln!(log, "w_drift={:e}", w_drift)?;

    let cfg = layer.config();
    let pass = w_drift <= 1e-6 && cond_after <= cfg.sigma_high / cfg.sigma_low;
    Ok(StabDemoOutcome {
        cond_before,
        cond_after,
        w_drift,
        fixes: report.values_fixed,
        pass,
    })
}

pub fn cmd_stabilize_demo(spec: &StabDemoSpec, log: &mut dyn Write) -> Result<i32> {
    let outcome = run_stab_demo(spec, log)?;
    Ok(if outcome.pass { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_layer_is_already_stable() {
        let spec =
            StabDemoSpec { d: 8, steps: 0, eta_large: 0.3, strategy: Strategy::PowerScan };
        let mut log = Vec::new();
        let outcome = run_stab_demo(&spec, &mut log).unwrap();
        assert!(outcome.pass);
        assert!(outcome.fixes.is_empty());
        assert!(String::from_utf8(log).unwrap().contains("already stable"));
    }

    #[test]
    fn driven_layer_is_restored_with_negligible_w_drift() {
        // 20 steps at eta 0.3 shrink one direction by 0.4^20 ~ 1e-8.
        let spec =
            StabDemoSpec { d: 8, steps: 20, eta_large: 0.3, strategy: Strategy::PowerScan };
        let mut log = Vec::new();
        let outcome = run_stab_demo(&spec, &mut log).unwrap();
        assert!(
            outcome.cond_before > 1e6,
            "drive must exceed cond 1e6, got {:e}",
            outcome.cond_before
        );
        assert!(outcome.cond_after <= 1e5, "cond after: {:e}", outcome.cond_after);
        assert!(outcome.w_drift <= 1e-6, "drift: {:e}", outcome.w_drift);
        assert!(!outcome.fixes.is_empty());
        assert!(outcome.pass);
    }

    #[test]
    fn both_strategies_restore_the_same_trajectory() {
        for strategy in [Strategy::FullSvd, Strategy::PowerScan] {
            let spec = StabDemoSpec { d: 6, steps: 18, eta_large: 0.35, strategy };
            let mut log = Vec::new();
            let outcome = run_stab_demo(&spec, &mut log).unwrap();
            assert!(outcome.pass, "strategy {:?} failed: {:?}", strategy, outcome);
            assert!(outcome.cond_before > 1e6);
        }
    }
}
