//! Uniform-stability measurements from paired runs that differ in one
//! batch example.

use super::TheoryError;
use crate::loss::{Batch, Example, LossKind, LossModel};
use crate::optim::{Algorithm, InnerState};
use crate::param::ParamVector;

/// Constant multiplying `ηρ²K²/B` in the AGD bound.
pub const AGD_STABILITY_CONSTANT: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityMeasurement {
    /// `‖𝒜(ξ) − 𝒜(ξ′)‖`.
    pub param_divergence: f64,
    /// `max_probe |f(𝒜(ξ), probe) − f(𝒜(ξ′), probe)|`.
    pub loss_divergence: f64,
    /// Closed-form `ε`.
    pub bound: f64,
    /// Smallest slack of the per-step divergence recursion, for GD and
    /// proximal GD.
    pub recursion_slack: Option<f64>,
    /// Largest iterate norm seen in either run.
    pub max_iterate_norm: f64,
}

impl StabilityMeasurement {
    pub fn ratio(&self) -> f64 {
        if self.bound > 0.0 {
            self.loss_divergence / self.bound
        } else {
            0.0
        }
    }

    /// Measured loss divergence within the bound, the Lipschitz reduction
    /// and the recursion, all up to `1e-10`.
    pub fn holds(&self, rho: f64) -> bool {
        const TOL: f64 = 1e-10;
        self.loss_divergence <= self.bound + TOL
            && self.loss_divergence <= rho * self.param_divergence + TOL
            && self.param_divergence <= self.bound / rho + TOL
            && self.recursion_slack.is_none_or(|s| s >= -TOL)
    }
}

/// Closed-form stability bound for `k` steps of the inner algorithm in
/// `state` on batches of size `b`.
pub fn stability_bound(state: &InnerState, rho: f64, b: usize, k: usize) -> f64 {
    let (k, b) = (k as f64, b as f64);
    match state {
        InnerState::Gd(s) => 2.0 * s.eta * k * rho * rho / b,
        InnerState::Prox(s) if s.gamma * s.eta < 1e-12 => 2.0 * s.eta * k * rho * rho / b,
        InnerState::Prox(s) => {
            2.0 * rho * rho / (b * s.gamma) * (1.0 - (1.0 - s.eta * s.gamma).powf(k))
        }
        InnerState::Agd(s) => AGD_STABILITY_CONSTANT * s.eta * rho * rho * k * k / b,
    }
}

/// Runs the inner algorithm from `(w_init, state)` on `batch` and on the
/// batch with example `swap_index` replaced, and compares the outputs on
/// `probes`. AGD is only supported for quadratic losses.
#[allow(clippy::too_many_arguments)]
pub fn measure_stability(
    model: &LossModel,
    batch: &Batch<'_>,
    swap_index: usize,
    replacement: &Example,
    probes: &[Example],
    w_init: &ParamVector,
    state: &InnerState,
    k: usize,
) -> Result<StabilityMeasurement, TheoryError> {
    if swap_index >= batch.len() {
        return Err(TheoryError::InvalidArgument(format!(
            "swap index {swap_index} outside batch of {}",
            batch.len()
        )));
    }
    if probes.is_empty() {
        return Err(TheoryError::InvalidArgument("probe set is empty".into()));
    }
    if state.algorithm() == Algorithm::Agd && model.kind() != LossKind::Quadratic {
        return Err(TheoryError::Unsupported(
            "AGD stability is only established for quadratic losses".into(),
        ));
    }
    let swapped = batch.with_replaced(swap_index, replacement);
    let a = state.run(model, w_init, batch, k, true)?;
    let b = state.run(model, w_init, &swapped, k, true)?;

    let mut loss_divergence: f64 = 0.0;
    for probe in probes {
        let diff = model.eval_example(&a.w_out, probe)? - model.eval_example(&b.w_out, probe)?;
        loss_divergence = loss_divergence.max(diff.abs());
    }

    let ta = a.trajectory.as_deref().unwrap_or_default();
    let tb = b.trajectory.as_deref().unwrap_or_default();
    let max_iterate_norm = ta.iter().chain(tb).map(|w| w.norm()).fold(0.0, f64::max);
    let contraction = match state {
        InnerState::Gd(_) => Some(1.0),
        InnerState::Prox(s) => Some(1.0 - s.eta * s.gamma),
        InnerState::Agd(_) => None,
    };
    let recursion_slack = contraction.map(|c| {
        let step = 2.0 * state.eta() * model.rho() / batch.len() as f64;
        ta.windows(2)
            .zip(tb.windows(2))
            .map(|(wa, wb)| c * wa[0].distance(&wb[0]) + step - wa[1].distance(&wb[1]))
            .fold(f64::INFINITY, f64::min)
    });

    Ok(StabilityMeasurement {
        param_divergence: a.w_out.distance(&b.w_out),
        loss_divergence,
        bound: stability_bound(state, model.rho(), batch.len(), k),
        recursion_slack,
        max_iterate_norm,
    })
}
