//! Full-factorial sweeps over batch size and echoing factor.

use anyhow::Result;
use echo_core::data::ConvergenceRecord;
use echo_core::loss::{Example, LossModel};
use echo_core::optim::StepBudget;
use serde::Serialize;

use crate::experiment::{tune, ExperimentSpec};
use crate::grid::GridSpec;

/// Aggregate of one (B, K) cell over its seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub dataset: String,
    pub algorithm: String,
    #[serde(rename = "B")]
    pub batch_size: usize,
    #[serde(rename = "K")]
    pub k: String,
    /// Mean echoing factor, the plot abscissa.
    pub k_mean: f64,
    pub eta: f64,
    pub mean_steps: f64,
    pub std_steps: f64,
    pub mean_samples: f64,
    pub std_samples: f64,
    pub converged: usize,
    pub runs: usize,
}

impl CellSummary {
    pub fn all_converged(&self) -> bool {
        self.converged == self.runs
    }
}

/// Sample mean and standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups records by (dataset, algorithm, B, K) in first-appearance order.
pub fn summarize(records: &[ConvergenceRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(&str, &str, usize, &str)> = Vec::new();
    for r in records {
        let key = (
            r.dataset.as_str(),
            r.algorithm.as_str(),
            r.batch_size,
            r.k.as_str(),
        );
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(dataset, algorithm, b, k)| {
            let cell: Vec<&ConvergenceRecord> = records
                .iter()
                .filter(|r| {
                    r.dataset == dataset
                        && r.algorithm == algorithm
                        && r.batch_size == b
                        && r.k == k
                })
                .collect();
            let steps: Vec<f64> = cell.iter().map(|r| r.steps_to_converge as f64).collect();
            let samples: Vec<f64> = cell.iter().map(|r| r.samples_consumed as f64).collect();
            let (mean_steps, std_steps) = mean_std(&steps);
            let (mean_samples, std_samples) = mean_std(&samples);
            let k_mean = match k.parse::<StepBudget>() {
                Ok(StepBudget::Fixed(k)) => k as f64,
                Ok(StepBudget::Schedule(ks)) if !ks.is_empty() => {
                    ks.iter().sum::<usize>() as f64 / ks.len() as f64
                }
                _ => f64::NAN,
            };
            CellSummary {
                dataset: dataset.to_string(),
                algorithm: algorithm.to_string(),
                batch_size: b,
                k: k.to_string(),
                k_mean,
                eta: cell[0].eta,
                mean_steps,
                std_steps,
                mean_samples,
                std_samples,
                converged: cell.iter().filter(|r| r.converged).count(),
                runs: cell.len(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// Template for every cell; its batch size and budget are replaced.
    pub base: ExperimentSpec,
    pub batch_sizes: Vec<usize>,
    pub budgets: Vec<StepBudget>,
    pub grid: GridSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub records: Vec<ConvergenceRecord>,
    pub cells: Vec<CellSummary>,
}

/// Tunes every (B, K) cell. `progress` is called after each cell.
pub fn sweep(
    model: &LossModel,
    data: &[Example],
    spec: &SweepSpec,
    progress: &mut dyn FnMut(&CellSummary),
) -> Result<SweepResult> {
    anyhow::ensure!(
        !spec.batch_sizes.is_empty() && !spec.budgets.is_empty(),
        "batch-size and echoing-factor lists must be nonempty"
    );
    let mut records = Vec::new();
    for &b in &spec.batch_sizes {
        for budget in &spec.budgets {
            let cell_spec = ExperimentSpec {
                batch_size: b,
                budget: budget.clone(),
                ..spec.base.clone()
            };
            let tuned = tune(model, data, &cell_spec, &spec.grid)?;
            let cell = tuned.records(&cell_spec);
            progress(&summarize(&cell)[0]);
            records.extend(cell);
        }
    }
    let cells = summarize(&records);
    Ok(SweepResult { records, cells })
}
