//! Numeric oracles for the guarantees behind data echoing.
//!
//! * [`regret`]: per-batch potential-bounded regret certificates for the
//!   three inner algorithms,
//! * [`stability`]: paired swap-one-example runs measured against the
//!   closed-form uniform-stability bounds,
//! * [`bounds`]: excess-risk bounds and their composition,
//! * [`chebyshev`]: the Chebyshev identity for powers of the AGD transfer
//!   matrix,
//! * [`suite`]: random instance generators and the full verification sweep.

pub mod bounds;
pub mod chebyshev;
pub mod regret;
pub mod stability;
pub mod suite;

use thiserror::Error;

use crate::loss::LossError;
use crate::optim::OptimError;

pub use bounds::{compose_main_theorem, theorem_bound, BoundKind};
pub use chebyshev::{chebyshev_u, transfer_power, TransferPower};
pub use regret::{check_regret_agd, check_regret_gd, check_regret_prox, RegretCertificate};
pub use stability::{measure_stability, stability_bound, StabilityMeasurement};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("expected {expected} certificates, got {actual}")]
    Mismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Relative tolerance for algebraic identities and certificate slacks.
pub const REL_TOL: f64 = 1e-9;

/// `value >= −REL_TOL · max(1, |scale_a|, |scale_b|)`.
pub fn within_tolerance(value: f64, scale_a: f64, scale_b: f64) -> bool {
    value >= -REL_TOL * 1f64.max(scale_a.abs()).max(scale_b.abs())
}
