//! Data-echoed stochastic gradient methods for convex problems.
//!
//! Data echoing takes `K` optimizer steps on every fresh minibatch while the
//! (slower) upstream pipeline prepares the next one. This crate provides
//!
//! * [`loss`]: per-example convex losses (quadratics, binary and multiclass
//!   logistic regression) with their smoothness and Lipschitz constants,
//! * [`optim`]: the stateful `K`-step inner algorithms (gradient descent,
//!   proximal gradient descent, Nesterov acceleration) and step-size rules,
//! * [`echo`]: the echoing meta-loop over a stream of fresh batches,
//! * [`theory`]: numeric oracles for the regret, stability and rate bounds,
//! * [`data`]: LIBSVM / IDX loaders, synthetic problems and run records.

pub mod data;
pub mod echo;
pub mod loss;
pub mod optim;
pub mod param;
pub mod theory;

pub use echo::{run_echo, Averaging, EchoConfig, EchoRunResult};
pub use loss::{Batch, Example, LossKind, LossModel};
pub use optim::{AgdState, GdState, InnerState, ProxState, StepBudget};
pub use param::ParamVector;
