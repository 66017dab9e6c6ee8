//! Stateful `K`-step inner algorithms `𝒜(w_init, s_init, ξ, K) → (w_out, s_out)`
//! and the step-size rules that go with them.
//!
//! Each runner takes `K` steps on the fixed batch objective `f̄_ξ`:
//!
//! * gradient descent: `w ← w − η ∇f̄(w)`; state `{η}` is unchanged,
//! * proximal gradient descent on `f̄(w) + (γ/2)‖w − pivot‖²`; the output
//!   pivot is the mean of `w_0, …, w_{K−1}`,
//! * Nesterov acceleration with the `λ` momentum sequence; `d` and `λ`
//!   are carried to the next batch.

mod step_size;

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use thiserror::Error;

use crate::loss::{Batch, LossError, LossModel};
use crate::param::ParamVector;

pub use step_size::{prox_params, step_size_agd, step_size_gd};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("non-finite iterate at inner step {step}")]
    Divergence { step: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("echoing factor must be at least 1")]
    ZeroSteps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GdState {
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxState {
    pub eta: f64,
    pub gamma: f64,
    pub pivot: ParamVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgdState {
    pub eta: f64,
    pub d: ParamVector,
    pub lambda: f64,
}

impl AgdState {
    /// Start of training: `λ = 1`, `d = 0`.
    pub fn initial(eta: f64, dimension: usize) -> Self {
        AgdState {
            eta,
            d: ParamVector::zeros(dimension),
            lambda: 1.0,
        }
    }
}

/// Positive root of `λ'² − λ' = λ²`.
pub fn next_lambda(lambda: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * lambda * lambda).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Gd,
    Prox,
    Agd,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Prox => "prox",
            Algorithm::Agd => "agd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gd" | "sgd" => Ok(Algorithm::Gd),
            "prox" | "prox-gd" | "proxgd" => Ok(Algorithm::Prox),
            "agd" | "nesterov" => Ok(Algorithm::Agd),
            other => Err(format!(
                "unknown algorithm `{other}` (expected gd, prox or agd)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InnerState {
    Gd(GdState),
    Prox(ProxState),
    Agd(AgdState),
}

impl InnerState {
    pub fn gd(eta: f64) -> Self {
        InnerState::Gd(GdState { eta })
    }

    pub fn prox(eta: f64, gamma: f64, pivot: ParamVector) -> Self {
        InnerState::Prox(ProxState { eta, gamma, pivot })
    }

    pub fn agd(eta: f64, dimension: usize) -> Self {
        InnerState::Agd(AgdState::initial(eta, dimension))
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            InnerState::Gd(_) => Algorithm::Gd,
            InnerState::Prox(_) => Algorithm::Prox,
            InnerState::Agd(_) => Algorithm::Agd,
        }
    }

    pub fn eta(&self) -> f64 {
        match self {
            InnerState::Gd(s) => s.eta,
            InnerState::Prox(s) => s.eta,
            InnerState::Agd(s) => s.eta,
        }
    }

    /// Runs the matching inner algorithm for `k` steps.
    pub fn run(
        &self,
        model: &LossModel,
        w_init: &ParamVector,
        batch: &Batch<'_>,
        k: usize,
        record: bool,
    ) -> Result<InnerRun<InnerState>, OptimError> {
        self.run_observed(model, w_init, batch, k, record, &mut |_, _| {
            ControlFlow::Continue(())
        })
    }

    /// Like [`InnerState::run`], calling `observer(j, w_j)` after each step
    /// `j = 1..=k`. A `Break` stops the run early; `InnerRun::steps` then
    /// tells how many steps were taken.
    pub fn run_observed(
        &self,
        model: &LossModel,
        w_init: &ParamVector,
        batch: &Batch<'_>,
        k: usize,
        record: bool,
        observer: &mut dyn FnMut(usize, &ParamVector) -> ControlFlow<()>,
    ) -> Result<InnerRun<InnerState>, OptimError> {
        Ok(match self {
            InnerState::Gd(s) => {
                gd_core(model, w_init, s, batch, k, record, observer)?.map_state(InnerState::Gd)
            }
            InnerState::Prox(s) => {
                prox_core(model, w_init, s, batch, k, record, observer)?.map_state(InnerState::Prox)
            }
            InnerState::Agd(s) => {
                agd_core(model, w_init, s, batch, k, record, observer)?.map_state(InnerState::Agd)
            }
        })
    }
}

/// Output of an inner run.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerRun<S> {
    pub w_out: ParamVector,
    pub state: S,
    /// `w_0, …, w_K` when recording was requested.
    pub trajectory: Option<Vec<ParamVector>>,
    pub steps: usize,
}

impl<S> InnerRun<S> {
    fn map_state<T>(self, f: impl FnOnce(S) -> T) -> InnerRun<T> {
        InnerRun {
            w_out: self.w_out,
            state: f(self.state),
            trajectory: self.trajectory,
            steps: self.steps,
        }
    }
}

pub fn gd_run(
    model: &LossModel,
    w_init: &ParamVector,
    s: &GdState,
    batch: &Batch<'_>,
    k: usize,
    record: bool,
) -> Result<InnerRun<GdState>, OptimError> {
    gd_core(model, w_init, s, batch, k, record, &mut |_, _| {
        ControlFlow::Continue(())
    })
}

pub fn prox_run(
    model: &LossModel,
    w_init: &ParamVector,
    s: &ProxState,
    batch: &Batch<'_>,
    k: usize,
    record: bool,
) -> Result<InnerRun<ProxState>, OptimError> {
    prox_core(model, w_init, s, batch, k, record, &mut |_, _| {
        ControlFlow::Continue(())
    })
}

pub fn agd_run(
    model: &LossModel,
    w_init: &ParamVector,
    s: &AgdState,
    batch: &Batch<'_>,
    k: usize,
    record: bool,
) -> Result<InnerRun<AgdState>, OptimError> {
    agd_core(model, w_init, s, batch, k, record, &mut |_, _| {
        ControlFlow::Continue(())
    })
}

fn check_common(
    model: &LossModel,
    w_init: &ParamVector,
    eta: f64,
    k: usize,
) -> Result<(), OptimError> {
    if k == 0 {
        return Err(OptimError::ZeroSteps);
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(OptimError::NonPositive {
            name: "eta",
            value: eta,
        });
    }
    if w_init.len() != model.dimension() {
        return Err(LossError::DimensionMismatch {
            expected: model.dimension(),
            actual: w_init.len(),
        }
        .into());
    }
    Ok(())
}

fn check_finite(w: &ParamVector, step: usize) -> Result<(), OptimError> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(OptimError::Divergence { step })
    }
}

fn gd_core(
    model: &LossModel,
    w_init: &ParamVector,
    s: &GdState,
    batch: &Batch<'_>,
    k: usize,
    record: bool,
    observer: &mut dyn FnMut(usize, &ParamVector) -> ControlFlow<()>,
) -> Result<InnerRun<GdState>, OptimError> {
    check_common(model, w_init, s.eta, k)?;
    let mut w = w_init.clone();
    let mut trajectory = record.then(|| vec![w.clone()]);
    let mut steps = 0;
    for j in 1..=k {
        let g = model.batch_grad(&w, batch)?;
        w.add_scaled(-s.eta, &g);
        check_finite(&w, j)?;
        steps = j;
        if let Some(t) = trajectory.as_mut() {
            t.push(w.clone());
        }
        if observer(j, &w).is_break() {
            break;
        }
    }
    Ok(InnerRun {
        w_out: w,
        state: s.clone(),
        trajectory,
        steps,
    })
}

fn prox_core(
    model: &LossModel,
    w_init: &ParamVector,
    s: &ProxState,
    batch: &Batch<'_>,
    k: usize,
    record: bool,
    observer: &mut dyn FnMut(usize, &ParamVector) -> ControlFlow<()>,
) -> Result<InnerRun<ProxState>, OptimError> {
    check_common(model, w_init, s.eta, k)?;
    if !(s.gamma >= 0.0 && s.gamma.is_finite()) {
        return Err(OptimError::InvalidState(format!(
            "gamma must be >= 0, got {}",
            s.gamma
        )));
    }
    if s.pivot.len() != w_init.len() {
        return Err(OptimError::InvalidState(format!(
            "pivot has length {}, expected {}",
            s.pivot.len(),
            w_init.len()
        )));
    }
    let mut w = w_init.clone();
    let mut trajectory = record.then(|| vec![w.clone()]);
    let mut iterate_sum = ParamVector::zeros(w.len());
    let mut steps = 0;
    for j in 1..=k {
        iterate_sum.add_scaled(1.0, &w);
        let mut g = model.batch_grad(&w, batch)?;
        for ((gi, wi), pi) in g.iter_mut().zip(w.iter()).zip(s.pivot.iter()) {
            *gi += s.gamma * (wi - pi);
        }
        w.add_scaled(-s.eta, &g);
        check_finite(&w, j)?;
        steps = j;
        if let Some(t) = trajectory.as_mut() {
            t.push(w.clone());
        }
        if observer(j, &w).is_break() {
            break;
        }
    }
    let mut pivot = iterate_sum;
    let inv = 1.0 / steps as f64;
    pivot.iter_mut().for_each(|v| *v *= inv);
    Ok(InnerRun {
        w_out: w,
        state: ProxState {
            eta: s.eta,
            gamma: s.gamma,
            pivot,
        },
        trajectory,
        steps,
    })
}

fn agd_core(
    model: &LossModel,
    w_init: &ParamVector,
    s: &AgdState,
    batch: &Batch<'_>,
    k: usize,
    record: bool,
    observer: &mut dyn FnMut(usize, &ParamVector) -> ControlFlow<()>,
) -> Result<InnerRun<AgdState>, OptimError> {
    check_common(model, w_init, s.eta, k)?;
    if !(s.lambda >= 1.0 && s.lambda.is_finite()) {
        return Err(OptimError::InvalidState(format!(
            "lambda must be >= 1, got {}",
            s.lambda
        )));
    }
    if s.d.len() != w_init.len() {
        return Err(OptimError::InvalidState(format!(
            "momentum has length {}, expected {}",
            s.d.len(),
            w_init.len()
        )));
    }
    let mut w = w_init.clone();
    let mut d = s.d.clone();
    let mut lambda = s.lambda;
    let mut trajectory = record.then(|| vec![w.clone()]);
    let mut steps = 0;
    for j in 1..=k {
        let mut x = w.clone();
        x.add_scaled(1.0, &d);
        let g = model.batch_grad(&x, batch)?;
        x.add_scaled(-s.eta, &g);
        check_finite(&x, j)?;
        let next = next_lambda(lambda);
        let gamma = (lambda - 1.0) / next;
        for ((di, xi), wi) in d.iter_mut().zip(x.iter()).zip(w.iter()) {
            *di = gamma * (xi - wi);
        }
        w = x;
        lambda = next;
        steps = j;
        if let Some(t) = trajectory.as_mut() {
            t.push(w.clone());
        }
        if observer(j, &w).is_break() {
            break;
        }
    }
    Ok(InnerRun {
        w_out: w,
        state: AgdState {
            eta: s.eta,
            d,
            lambda,
        },
        trajectory,
        steps,
    })
}

/// Echoing factor: a fixed `K`, or a per-batch schedule `K_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepBudget {
    Fixed(usize),
    /// Used cyclically when shorter than the number of batches.
    Schedule(Vec<usize>),
}

impl StepBudget {
    pub fn validate(&self) -> Result<(), OptimError> {
        match self {
            StepBudget::Fixed(0) => Err(OptimError::ZeroSteps),
            StepBudget::Fixed(_) => Ok(()),
            StepBudget::Schedule(ks) if ks.is_empty() || ks.contains(&0) => {
                Err(OptimError::ZeroSteps)
            }
            StepBudget::Schedule(_) => Ok(()),
        }
    }

    /// `K_t` for outer step `t` (0-based).
    pub fn k_at(&self, t: usize) -> usize {
        match self {
            StepBudget::Fixed(k) => *k,
            StepBudget::Schedule(ks) => ks[t % ks.len()],
        }
    }

    /// `Σ_{t<T} K_t`.
    pub fn total_steps(&self, outer: usize) -> usize {
        (0..outer).map(|t| self.k_at(t)).sum()
    }

    /// Largest `K_t` in the budget.
    pub fn max_k(&self) -> usize {
        match self {
            StepBudget::Fixed(k) => *k,
            StepBudget::Schedule(ks) => ks.iter().copied().max().unwrap_or(0),
        }
    }
}

impl fmt::Display for StepBudget {
    /// `K` or `K_1;K_2;…`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepBudget::Fixed(k) => write!(f, "{k}"),
            StepBudget::Schedule(ks) => {
                let parts: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                f.write_str(&parts.join(";"))
            }
        }
    }
}

impl FromStr for StepBudget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let ks = s
            .split([';', ','])
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|e| format!("bad K `{p}`: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let budget = match ks.as_slice() {
            [k] => StepBudget::Fixed(*k),
            _ => StepBudget::Schedule(ks),
        };
        budget.validate().map_err(|e| e.to_string())?;
        Ok(budget)
    }
}
