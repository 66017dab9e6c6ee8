//! The echoing meta-loop: for each fresh batch `ξ_t`, run the inner
//! algorithm for `K_t` steps from `(w_t, s_t)` and carry `(w_{t+1}, s_{t+1})`
//! forward.
//!
//! The returned point is either the average of `w_0, …, w_{T−1}` or the
//! final iterate `w_T`.

use std::collections::VecDeque;
use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::loss::{Batch, Example, LossError, LossModel};
use crate::optim::{Algorithm, InnerState, OptimError, StepBudget};
use crate::param::ParamVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EchoError {
    #[error("batch stream exhausted after {delivered} of {requested} batches")]
    StreamExhausted { delivered: usize, requested: usize },
    #[error("inner algorithm failed at outer step {outer}: {source}")]
    Inner { outer: usize, source: OptimError },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{averaging:?} output is not the one analysed for {algorithm}")]
    IncompatibleAveraging {
        algorithm: Algorithm,
        averaging: Averaging,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Averaging {
    /// `(1/T) Σ_{t=0}^{T−1} w_t`.
    AverageIterate,
    /// `w_T`.
    FinalIterate,
}

impl Averaging {
    /// Output mode the guarantees are stated for: averaged for GD and
    /// proximal GD, final for AGD.
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Gd | Algorithm::Prox => Averaging::AverageIterate,
            Algorithm::Agd => Averaging::FinalIterate,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EchoConfig {
    pub batch_size: usize,
    pub outer_steps: usize,
    pub budget: StepBudget,
    pub averaging: Averaging,
    pub seed: u64,
    /// Keep `w_0, …, w_T` in the result.
    pub record_iterates: bool,
    /// Evaluate `f̄_{ξ_t}(w_{t+1})` after every outer step.
    pub record_batch_losses: bool,
}

impl EchoConfig {
    pub fn new(
        algorithm: Algorithm,
        batch_size: usize,
        outer_steps: usize,
        budget: StepBudget,
        seed: u64,
    ) -> Self {
        EchoConfig {
            batch_size,
            outer_steps,
            budget,
            averaging: Averaging::for_algorithm(algorithm),
            seed,
            record_iterates: false,
            record_batch_losses: false,
        }
    }

    pub fn validate(&self) -> Result<(), EchoError> {
        if self.batch_size == 0 {
            return Err(EchoError::InvalidConfig(
                "batch size must be at least 1".into(),
            ));
        }
        if self.outer_steps == 0 {
            return Err(EchoError::InvalidConfig(
                "need at least one fresh batch".into(),
            ));
        }
        self.budget
            .validate()
            .map_err(|e| EchoError::InvalidConfig(e.to_string()))
    }
}

/// A source of fresh batches.
pub trait BatchSource<'a> {
    fn batch_size(&self) -> usize;
    fn next_batch(&mut self) -> Option<Batch<'a>>;
}

/// I.i.d. with-replacement sampling from a finite dataset.
///
/// Batch `t` of a stream with seed `s` is drawn from `ChaCha8Rng` seeded
/// with `s` on stream `t`, so any batch can be regenerated independently
/// of the ones before it.
#[derive(Clone, Debug)]
pub struct SamplingStream<'a> {
    data: &'a [Example],
    batch_size: usize,
    seed: u64,
    next: u64,
    limit: Option<u64>,
}

pub fn make_stream(
    data: &[Example],
    batch_size: usize,
    seed: u64,
) -> Result<SamplingStream<'_>, EchoError> {
    if data.is_empty() {
        return Err(LossError::EmptyDataset.into());
    }
    if batch_size == 0 {
        return Err(EchoError::InvalidConfig(
            "batch size must be at least 1".into(),
        ));
    }
    Ok(SamplingStream {
        data,
        batch_size,
        seed,
        next: 0,
        limit: None,
    })
}

impl<'a> SamplingStream<'a> {
    /// Position the stream so the next batch is batch `t`.
    pub fn skip_to(mut self, t: u64) -> Self {
        self.next = t;
        self
    }

    /// Stop after `count` batches in total.
    pub fn limit(mut self, count: u64) -> Self {
        self.limit = Some(count);
        self
    }

    /// Dataset indices of batch `t`.
    pub fn indices(&self, t: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        let n = self.data.len() as u64;
        (0..self.batch_size)
            .map(|_| rng.random_range(0..n) as usize)
            .collect()
    }

    pub fn batch(&self, t: u64) -> Batch<'a> {
        let data = self.data;
        Batch::new(self.indices(t).into_iter().map(|i| &data[i]).collect())
    }
}

impl<'a> BatchSource<'a> for SamplingStream<'a> {
    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn next_batch(&mut self) -> Option<Batch<'a>> {
        if self.limit.is_some_and(|l| self.next >= l) {
            return None;
        }
        let batch = self.batch(self.next);
        self.next += 1;
        Some(batch)
    }
}

/// A fixed, finite list of batches.
#[derive(Clone, Debug)]
pub struct FixedBatches<'a> {
    batch_size: usize,
    batches: VecDeque<Batch<'a>>,
}

impl<'a> FixedBatches<'a> {
    pub fn new(batches: Vec<Batch<'a>>) -> Result<Self, EchoError> {
        let batch_size = batches.first().map_or(0, |b| b.len());
        if batch_size == 0 || batches.iter().any(|b| b.len() != batch_size) {
            return Err(EchoError::InvalidConfig(
                "fixed batches must be nonempty and of equal size".into(),
            ));
        }
        Ok(FixedBatches {
            batch_size,
            batches: batches.into(),
        })
    }
}

impl<'a> BatchSource<'a> for FixedBatches<'a> {
    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn next_batch(&mut self) -> Option<Batch<'a>> {
        self.batches.pop_front()
    }
}

/// Loader period and optimizer step time, in the same time unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagModel {
    pub loader_period: f64,
    pub step_time: f64,
}

impl LagModel {
    pub fn effective_k(&self) -> Result<usize, EchoError> {
        effective_k(self.loader_period, self.step_time)
    }
}

/// Number of optimizer steps that fit in one loader period, at least 1.
pub fn effective_k(loader_period: f64, step_time: f64) -> Result<usize, EchoError> {
    for (name, v) in [("loader period", loader_period), ("step time", step_time)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(EchoError::InvalidConfig(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    Ok(((loader_period / step_time).floor() as usize).max(1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EchoRunResult {
    /// The meta-algorithm's output (average or final iterate).
    pub w_out: ParamVector,
    /// The last iterate reached.
    pub w_final: ParamVector,
    pub final_state: InnerState,
    /// Running mean of the outer iterates visited so far.
    pub running_average: ParamVector,
    pub outer_iterates: Option<Vec<ParamVector>>,
    pub batch_losses: Vec<f64>,
    /// Fresh batches consumed.
    pub outer_done: usize,
    pub steps_taken: usize,
    pub samples_consumed: usize,
    /// The observer stopped the run before the budget was spent.
    pub stopped_early: bool,
}

/// Point from which a run can be continued.
#[derive(Clone, Debug, PartialEq)]
pub struct EchoCheckpoint {
    pub outer_done: usize,
    pub w: ParamVector,
    pub state: InnerState,
    pub running_average: ParamVector,
    pub steps_taken: usize,
}

impl EchoCheckpoint {
    pub fn start(w0: &ParamVector, s0: &InnerState) -> Self {
        EchoCheckpoint {
            outer_done: 0,
            w: w0.clone(),
            state: s0.clone(),
            running_average: ParamVector::zeros(w0.len()),
            steps_taken: 0,
        }
    }
}

impl From<&EchoRunResult> for EchoCheckpoint {
    fn from(r: &EchoRunResult) -> Self {
        EchoCheckpoint {
            outer_done: r.outer_done,
            w: r.w_final.clone(),
            state: r.final_state.clone(),
            running_average: r.running_average.clone(),
            steps_taken: r.steps_taken,
        }
    }
}

/// Progress reported to an observer after every inner step.
#[derive(Debug)]
pub struct StepInfo<'w> {
    /// 0-based index of the current fresh batch.
    pub outer: usize,
    /// 1-based index of the step within the batch.
    pub inner: usize,
    /// Inner steps taken so far, this one included.
    pub total_steps: usize,
    /// Fresh samples consumed so far, this batch included.
    pub samples: usize,
    pub w: &'w ParamVector,
}

pub fn run_echo<'a>(
    model: &LossModel,
    w0: &ParamVector,
    s0: &InnerState,
    source: &mut dyn BatchSource<'a>,
    cfg: &EchoConfig,
) -> Result<EchoRunResult, EchoError> {
    run_echo_from(
        model,
        EchoCheckpoint::start(w0, s0),
        source,
        cfg,
        &mut |_| ControlFlow::Continue(()),
    )
}

/// [`run_echo`] with an observer called after every inner step. A `Break`
/// ends the run after the current step.
pub fn run_echo_with<'a>(
    model: &LossModel,
    w0: &ParamVector,
    s0: &InnerState,
    source: &mut dyn BatchSource<'a>,
    cfg: &EchoConfig,
    observer: &mut dyn FnMut(&StepInfo<'_>) -> ControlFlow<()>,
) -> Result<EchoRunResult, EchoError> {
    run_echo_from(model, EchoCheckpoint::start(w0, s0), source, cfg, observer)
}

/// Continues a run from `start` until `cfg.outer_steps` batches have been
/// consumed in total. `source` must yield the batches from
/// `start.outer_done` on.
pub fn run_echo_from<'a>(
    model: &LossModel,
    start: EchoCheckpoint,
    source: &mut dyn BatchSource<'a>,
    cfg: &EchoConfig,
    observer: &mut dyn FnMut(&StepInfo<'_>) -> ControlFlow<()>,
) -> Result<EchoRunResult, EchoError> {
    cfg.validate()?;
    let algorithm = start.state.algorithm();
    if cfg.averaging != Averaging::for_algorithm(algorithm) {
        return Err(EchoError::IncompatibleAveraging {
            algorithm,
            averaging: cfg.averaging,
        });
    }
    if source.batch_size() != cfg.batch_size {
        return Err(EchoError::InvalidConfig(format!(
            "stream batch size {} differs from configured {}",
            source.batch_size(),
            cfg.batch_size
        )));
    }
    if start.w.len() != model.dimension() {
        return Err(LossError::DimensionMismatch {
            expected: model.dimension(),
            actual: start.w.len(),
        }
        .into());
    }
    let EchoCheckpoint {
        outer_done,
        mut w,
        mut state,
        running_average: mut average,
        mut steps_taken,
    } = start;
    let mut outer_iterates = cfg.record_iterates.then(|| vec![w.clone()]);
    let mut batch_losses = Vec::new();
    let mut t = outer_done;
    let mut stopped_early = false;

    while t < cfg.outer_steps {
        let batch = source.next_batch().ok_or(EchoError::StreamExhausted {
            delivered: t,
            requested: cfg.outer_steps,
        })?;
        // incremental mean keeps a constant sequence exact
        let weight = 1.0 / (t as f64 + 1.0);
        for (a, wi) in average.iter_mut().zip(w.iter()) {
            *a += (wi - *a) * weight;
        }

        let k = cfg.budget.k_at(t);
        let samples = (t + 1) * cfg.batch_size;
        let steps_before = steps_taken;
        let mut stop = false;
        let run = state
            .run_observed(model, &w, &batch, k, false, &mut |j, wj| {
                let info = StepInfo {
                    outer: t,
                    inner: j,
                    total_steps: steps_before + j,
                    samples,
                    w: wj,
                };
                let flow = observer(&info);
                stop = flow.is_break();
                flow
            })
            .map_err(|source| EchoError::Inner { outer: t, source })?;

        steps_taken += run.steps;
        w = run.w_out;
        state = run.state;
        t += 1;
        if cfg.record_batch_losses {
            batch_losses.push(model.batch_loss(&w, &batch)?);
        }
        if let Some(it) = outer_iterates.as_mut() {
            it.push(w.clone());
        }
        if stop {
            stopped_early = true;
            break;
        }
    }

    let w_out = match cfg.averaging {
        Averaging::AverageIterate => average.clone(),
        Averaging::FinalIterate => w.clone(),
    };
    Ok(EchoRunResult {
        w_out,
        w_final: w,
        final_state: state,
        running_average: average,
        outer_iterates,
        batch_losses,
        outer_done: t,
        steps_taken,
        samples_consumed: t * cfg.batch_size,
        stopped_early,
    })
}
