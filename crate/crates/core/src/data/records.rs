//! Per-run convergence records and their CSV form.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

pub const RECORD_COLUMNS: [&str; 11] = [
    "dataset",
    "algorithm",
    "B",
    "K",
    "eta",
    "gamma",
    "seed",
    "converged",
    "steps_to_converge",
    "samples_consumed",
    "final_loss",
];

/// Outcome of one training run. `k` is the echoing factor or a
/// `;`-separated schedule; `gamma` is 0 for algorithms without a prox term.
/// Unconverged runs report the step cap in `steps_to_converge`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub dataset: String,
    pub algorithm: String,
    #[serde(rename = "B")]
    pub batch_size: usize,
    #[serde(rename = "K")]
    pub k: String,
    pub eta: f64,
    pub gamma: f64,
    pub seed: u64,
    pub converged: bool,
    pub steps_to_converge: u64,
    pub samples_consumed: u64,
    pub final_loss: f64,
}

pub fn write_records(records: &[ConvergenceRecord], writer: impl Write) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| DataError::io("<output>", e))
}

pub fn read_records(reader: impl Read) -> Result<Vec<ConvergenceRecord>, DataError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if let Some(missing) = RECORD_COLUMNS
        .iter()
        .find(|c| !headers.iter().any(|h| h == **c))
    {
        return Err(DataError::MissingColumn(missing.to_string()));
    }
    r.deserialize()
        .map(|row| row.map_err(DataError::from))
        .collect()
}

pub fn save_records(
    records: &[ConvergenceRecord],
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    write_records(records, file)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<ConvergenceRecord>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    read_records(file)
}
