//! Demographic-parity fair learning.
//!
//! * [`domain`]: datasets, discrete joints, policies, score models, DRO weights.
//! * [`measures`]: DDP, DEO, ρ_TV, mutual information, ERMI, maximal correlation.
//! * [`surrogate`]: differentiable penalties and weighted risk with analytic gradients.
//! * [`trainer`]: ERM, penalized and SA-DRO gradient descent-ascent.
//! * [`oracle`]: LP / convex solvers on discrete joints and bound verifiers.
//! * [`fedsim`]: deterministic FedAvg-style simulation.
//! * [`dataio`]: CSV ingestion, imbalance subsampling, synthetic generators.

pub mod dataio;
pub mod domain;
mod error;
pub mod fedsim;
pub mod measures;
pub mod oracle;
pub mod surrogate;
pub mod trainer;

pub use domain::*;
pub use error::{Error, Result};
pub use measures::DependenceKind;
