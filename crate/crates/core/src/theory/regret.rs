//! Per-batch regret certificates.
//!
//! Each check runs the inner algorithm once and evaluates both sides of its
//! potential-bounded regret inequality `lhs ≤ rhs`, where `rhs` is the
//! decrease of the potential from input to output. Certificates are computed
//! even when the step-size precondition fails; `precondition_ok` records it.

use super::{within_tolerance, TheoryError};
use crate::loss::{Batch, LossModel};
use crate::optim::{agd_run, gd_run, prox_run, AgdState, GdState, ProxState};
use crate::param::ParamVector;

#[derive(Clone, Debug, PartialEq)]
pub struct RegretCertificate {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    pub potential_init: f64,
    pub potential_out: f64,
    pub precondition_ok: bool,
}

impl RegretCertificate {
    fn new(
        lhs: f64,
        potential_init: f64,
        potential_out: f64,
        rhs: f64,
        precondition_ok: bool,
    ) -> Self {
        RegretCertificate {
            lhs,
            rhs,
            slack: rhs - lhs,
            potential_init,
            potential_out,
            precondition_ok,
        }
    }

    /// Slack is nonnegative up to the relative tolerance.
    pub fn holds(&self) -> bool {
        within_tolerance(self.slack, self.lhs, self.rhs)
    }
}

fn step_ok(eta: f64, limit: f64) -> bool {
    eta <= limit * (1.0 + 1e-12)
}

/// Gradient descent with `V(w) = ‖w − w*‖² / (2ηK)`:
/// `f̄(w_out) − f̄(w*) ≤ V(w_init) − V(w_out)`.
pub fn check_regret_gd(
    model: &LossModel,
    batch: &Batch<'_>,
    w_init: &ParamVector,
    eta: f64,
    k: usize,
    w_star: &ParamVector,
) -> Result<RegretCertificate, TheoryError> {
    let run = gd_run(model, w_init, &GdState { eta }, batch, k, false)?;
    let lhs = model.batch_loss(&run.w_out, batch)? - model.batch_loss(w_star, batch)?;
    let scale = 1.0 / (2.0 * eta * k as f64);
    let v_init = scale * w_init.distance(w_star).powi(2);
    let v_out = scale * run.w_out.distance(w_star).powi(2);
    Ok(RegretCertificate::new(
        lhs,
        v_init,
        v_out,
        v_init - v_out,
        step_ok(eta, 1.0 / model.beta()),
    ))
}

/// `‖w − w*‖² / (2ηK) + (γ/2)‖pivot − w*‖²`.
pub fn prox_potential(w: &ParamVector, state: &ProxState, k: usize, w_star: &ParamVector) -> f64 {
    w.distance(w_star).powi(2) / (2.0 * state.eta * k as f64)
        + 0.5 * state.gamma * state.pivot.distance(w_star).powi(2)
}

/// Proximal gradient descent: `f̄(w_out) − f̄(w*) ≤ V(w_init, s_init) −
/// V(w_out, s_out)` with the potential of [`prox_potential`].
pub fn check_regret_prox(
    model: &LossModel,
    batch: &Batch<'_>,
    w_init: &ParamVector,
    state: &ProxState,
    k: usize,
    w_star: &ParamVector,
) -> Result<RegretCertificate, TheoryError> {
    let run = prox_run(model, w_init, state, batch, k, false)?;
    let lhs = model.batch_loss(&run.w_out, batch)? - model.batch_loss(w_star, batch)?;
    let v_init = prox_potential(w_init, state, k, w_star);
    let v_out = prox_potential(&run.w_out, &run.state, k, w_star);
    Ok(RegretCertificate::new(
        lhs,
        v_init,
        v_out,
        v_init - v_out,
        step_ok(state.eta, 1.0 / (model.beta() + state.gamma)),
    ))
}

/// Nesterov acceleration, checked as
/// `(λ_out² − λ_out)(f̄(w_out) − f̄(w)) − (λ_init² − λ_init)(f̄(w_init) − f̄(w))
///  ≤ (1/2η)(‖w_init + λ_init d_init − w‖² − ‖w_out + λ_out d_out − w‖²)`.
///
/// The potentials reported are `(λ² − λ)(f̄(w) − f̄(w*)) + ‖w + λd − w*‖²/(2η)`.
pub fn check_regret_agd(
    model: &LossModel,
    batch: &Batch<'_>,
    w_init: &ParamVector,
    state: &AgdState,
    k: usize,
    w_star: &ParamVector,
) -> Result<RegretCertificate, TheoryError> {
    let run = agd_run(model, w_init, state, batch, k, false)?;
    let f_star = model.batch_loss(w_star, batch)?;
    let gap_init = model.batch_loss(w_init, batch)? - f_star;
    let gap_out = model.batch_loss(&run.w_out, batch)? - f_star;
    let weight = |l: f64| l * l - l;
    let lhs = weight(run.state.lambda) * gap_out - weight(state.lambda) * gap_init;
    let anchor = |w: &ParamVector, s: &AgdState| {
        let mut z = w.clone();
        z.add_scaled(s.lambda, &s.d);
        z.distance(w_star).powi(2) / (2.0 * s.eta)
    };
    let dist_init = anchor(w_init, state);
    let dist_out = anchor(&run.w_out, &run.state);
    Ok(RegretCertificate::new(
        lhs,
        weight(state.lambda) * gap_init + dist_init,
        weight(run.state.lambda) * gap_out + dist_out,
        dist_init - dist_out,
        step_ok(state.eta, 1.0 / model.beta()) && state.lambda >= 1.0,
    ))
}
