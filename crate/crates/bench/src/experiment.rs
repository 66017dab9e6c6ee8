//! Convergence-time measurement and learning-rate tuning.
//!
//! A run trains from `w = 0` with a constant step size, evaluating the full
//! training loss every `eval_every` inner steps, and stops when the
//! [`StoppingRule`] fires, when the loss blows up, or at the step cap.
//! Tuning picks the grid candidate with the smallest mean steps-to-converge
//! over the seeds (ties go to the smaller step size).

use std::collections::HashMap;
use std::ops::ControlFlow;

use anyhow::{Context, Result};
use echo_core::data::ConvergenceRecord;
use echo_core::echo::{make_stream, run_echo_with, EchoConfig, EchoError};
use echo_core::loss::{Example, LossModel};
use echo_core::optim::{Algorithm, InnerState, StepBudget};
use echo_core::ParamVector;

use crate::grid::GridSpec;
use crate::stopping::{StoppingRule, WindowTracker};

/// A loss above `DIVERGENCE_FACTOR` times the starting loss ends the run
/// as unconverged.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

pub const DEFAULT_STEP_CAP: u64 = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub batch_size: usize,
    pub budget: StepBudget,
    /// Prox strength for proximal GD; ignored otherwise.
    pub gamma: f64,
    pub stopping: StoppingRule,
    pub step_cap: u64,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOutcome {
    pub converged: bool,
    pub diverged: bool,
    /// Inner steps when the run stopped.
    pub steps: u64,
    /// Fresh samples consumed when the run stopped.
    pub samples: u64,
    /// Last full training-loss evaluation.
    pub final_loss: f64,
}

impl ExperimentSpec {
    fn initial_state(&self, eta: f64, dimension: usize) -> InnerState {
        match self.algorithm {
            Algorithm::Gd => InnerState::gd(eta),
            Algorithm::Prox => InnerState::prox(eta, self.gamma, ParamVector::zeros(dimension)),
            Algorithm::Agd => InnerState::agd(eta, dimension),
        }
    }

    pub fn record(&self, eta: f64, seed: u64, outcome: &RunOutcome) -> ConvergenceRecord {
        ConvergenceRecord {
            dataset: self.dataset.clone(),
            algorithm: self.algorithm.to_string(),
            batch_size: self.batch_size,
            k: self.budget.to_string(),
            eta,
            gamma: if self.algorithm == Algorithm::Prox {
                self.gamma
            } else {
                0.0
            },
            seed,
            converged: outcome.converged,
            steps_to_converge: if outcome.converged {
                outcome.steps
            } else {
                self.step_cap
            },
            samples_consumed: outcome.samples,
            final_loss: outcome.final_loss,
        }
    }
}

/// One training run with step size `eta` on stream `seed`, stopped after at
/// most `cap` inner steps.
pub fn run_single(
    model: &LossModel,
    data: &[Example],
    spec: &ExperimentSpec,
    eta: f64,
    seed: u64,
    cap: u64,
) -> Result<RunOutcome> {
    let w0 = ParamVector::zeros(model.dimension());
    let initial_loss = model.mean_loss(&w0, data)?;
    let blow_up = DIVERGENCE_FACTOR * initial_loss.max(1e-12);
    let state = spec.initial_state(eta, model.dimension());
    let cfg = EchoConfig::new(
        spec.algorithm,
        spec.batch_size,
        cap.max(1) as usize,
        spec.budget.clone(),
        seed,
    );
    let mut stream = make_stream(data, spec.batch_size, seed)?;

    let mut tracker = WindowTracker::new(spec.stopping.window);
    let eval_every = spec.stopping.eval_every.max(1);
    let mut outcome = RunOutcome {
        converged: false,
        diverged: false,
        steps: 0,
        samples: 0,
        final_loss: initial_loss,
    };
    let mut failure = None;
    let result = run_echo_with(model, &w0, &state, &mut stream, &cfg, &mut |info| {
        outcome.steps = info.total_steps as u64;
        outcome.samples = info.samples as u64;
        if info.total_steps % eval_every == 0 {
            match model.mean_loss(info.w, data) {
                Ok(loss) if loss.is_finite() && loss <= blow_up => {
                    outcome.final_loss = loss;
                    if tracker
                        .push(loss)
                        .is_some_and(|m| m < spec.stopping.threshold)
                    {
                        outcome.converged = true;
                        return ControlFlow::Break(());
                    }
                }
                Ok(loss) => {
                    outcome.final_loss = loss;
                    outcome.diverged = true;
                    return ControlFlow::Break(());
                }
                Err(e) => {
                    failure = Some(e);
                    return ControlFlow::Break(());
                }
            }
        }
        if outcome.steps >= cap {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    match result {
        Ok(_) => {}
        Err(EchoError::Inner { .. }) => {
            outcome.diverged = true;
            outcome.final_loss = f64::NAN;
        }
        Err(e) => return Err(e.into()),
    }
    Ok(outcome)
}

/// Result of evaluating one grid candidate.
#[derive(Clone, Debug, PartialEq)]
pub enum CandidateStatus {
    /// All seeds ran; `total_steps` sums steps-to-converge (cap when
    /// unconverged).
    Completed {
        total_steps: u64,
        outcomes: Vec<RunOutcome>,
    },
    /// Stopped once its partial sum could no longer beat the best.
    Pruned,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub eta: f64,
    pub outcomes: Vec<RunOutcome>,
    pub candidates: Vec<(f64, CandidateStatus)>,
    /// No candidate converged on any seed.
    pub all_unconverged: bool,
}

impl TuneResult {
    pub fn records(&self, spec: &ExperimentSpec) -> Vec<ConvergenceRecord> {
        spec.seeds
            .iter()
            .zip(&self.outcomes)
            .map(|(&seed, o)| spec.record(self.eta, seed, o))
            .collect()
    }
}

/// Coarse stride, in grid points, of the incumbent search.
const PROBE_STRIDE: usize = 5;
/// Growth factor of the incumbent-search cap.
const PROBE_GROWTH: u64 = 4;

/// Memo of deterministic runs keyed by (candidate, seed index), each with the
/// cap it ran under.
struct RunCache<'a> {
    model: &'a LossModel,
    data: &'a [Example],
    spec: &'a ExperimentSpec,
    etas: Vec<f64>,
    runs: HashMap<(usize, usize), (u64, RunOutcome)>,
}

impl RunCache<'_> {
    /// Outcome of candidate `cand` on seed `s` under `cap`. A stored run
    /// answers without rerunning when it converged or diverged within `cap`
    /// or when it ran unconverged to at least `cap`.
    fn run(&mut self, cand: usize, s: usize, cap: u64) -> Result<RunOutcome> {
        if let Some(&(ran_to, o)) = self.runs.get(&(cand, s)) {
            if (o.converged || o.diverged) && o.steps <= cap {
                return Ok(o);
            }
            if o.converged {
                return Ok(RunOutcome {
                    converged: false,
                    steps: cap,
                    ..o
                });
            }
            if ran_to >= cap {
                return Ok(o);
            }
        }
        let (eta, seed) = (self.etas[cand], self.spec.seeds[s]);
        let o = run_single(self.model, self.data, self.spec, eta, seed, cap)
            .with_context(|| format!("run with eta={eta} seed={seed}"))?;
        self.runs.insert((cand, s), (cap, o));
        Ok(o)
    }
}

/// Grid search for the step size minimising mean steps-to-converge.
///
/// A coarse race on the first seed with a growing cap finds a converging
/// incumbent. The full grid is then visited outward from it, with each run
/// capped at the budget left before its candidate would lose to the best so
/// far, so the choice equals that of an exhaustive search.
pub fn tune(
    model: &LossModel,
    data: &[Example],
    spec: &ExperimentSpec,
    grid: &GridSpec,
) -> Result<TuneResult> {
    anyhow::ensure!(!spec.seeds.is_empty(), "at least one seed is required");
    anyhow::ensure!(spec.step_cap > 0, "step cap must be positive");
    let etas = grid.candidates();
    anyhow::ensure!(!etas.is_empty(), "no grid candidates");
    let m = etas.len();
    let mut cache = RunCache {
        model,
        data,
        spec,
        etas: etas.clone(),
        runs: HashMap::new(),
    };

    let probes: Vec<usize> = (0..m).rev().step_by(PROBE_STRIDE).collect();
    let mut cap =
        ((2 * spec.stopping.window * spec.stopping.eval_every) as u64).clamp(1, spec.step_cap);
    let incumbent = 'race: loop {
        for &i in &probes {
            if cache.run(i, 0, cap)?.converged {
                break 'race Some(i);
            }
        }
        if cap == spec.step_cap {
            break None;
        }
        cap = (cap * PROBE_GROWTH).min(spec.step_cap);
    };
    let mut order: Vec<usize> = (0..m).rev().collect();
    if let Some(i) = incumbent {
        order.sort_by_key(|&j| (j.abs_diff(i), j));
    }

    let mut status: Vec<Option<CandidateStatus>> = vec![None; m];
    let mut best: Option<(u64, usize)> = None;
    for &j in &order {
        let mut partial = 0u64;
        let mut outcomes = Vec::with_capacity(spec.seeds.len());
        let mut pruned = false;
        for s in 0..spec.seeds.len() {
            // a larger eta must beat the best strictly; a smaller one may tie
            let remaining = match best {
                None => u64::MAX,
                Some((sum, b)) if j < b => sum.saturating_sub(partial),
                Some((sum, _)) => sum.saturating_sub(partial + 1),
            };
            let run_cap = spec.step_cap.min(remaining);
            if run_cap == 0 {
                pruned = true;
                break;
            }
            let outcome = cache.run(j, s, run_cap)?;
            if !outcome.converged && run_cap < spec.step_cap {
                pruned = true;
                break;
            }
            partial += if outcome.converged {
                outcome.steps
            } else {
                spec.step_cap
            };
            outcomes.push(outcome);
        }
        if pruned {
            status[j] = Some(CandidateStatus::Pruned);
            continue;
        }
        if best.is_none_or(|(sum, b)| partial < sum || (partial == sum && j < b)) {
            best = Some((partial, j));
        }
        status[j] = Some(CandidateStatus::Completed {
            total_steps: partial,
            outcomes,
        });
    }

    let (_, b) = best.context("no grid candidates")?;
    let candidates: Vec<(f64, CandidateStatus)> = etas
        .iter()
        .zip(status)
        .map(|(&eta, st)| (eta, st.expect("every candidate visited")))
        .collect();
    let outcomes = match &candidates[b].1 {
        CandidateStatus::Completed { outcomes, .. } => outcomes.clone(),
        CandidateStatus::Pruned => unreachable!("best candidate completed"),
    };
    Ok(TuneResult {
        eta: etas[b],
        all_unconverged: outcomes.iter().all(|o| !o.converged),
        outcomes,
        candidates,
    })
}

/// Runs every seed at a fixed step size.
pub fn run_fixed(
    model: &LossModel,
    data: &[Example],
    spec: &ExperimentSpec,
    eta: f64,
) -> Result<Vec<ConvergenceRecord>> {
    spec.seeds
        .iter()
        .map(|&seed| {
            let o = run_single(model, data, spec, eta, seed, spec.step_cap)?;
            Ok(spec.record(eta, seed, &o))
        })
        .collect()
}
