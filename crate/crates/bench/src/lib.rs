//! Experiment harness for data-echoed optimizers: learning-rate tuning,
//! convergence-time sweeps, plots and the command-line driver.

pub mod cli;
pub mod config;
pub mod datasets;
pub mod experiment;
pub mod grid;
pub mod plot;
pub mod stopping;
pub mod sweep;
