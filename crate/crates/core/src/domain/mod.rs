//! Domain types shared by every module.

mod dataset;
mod joint;
mod model;
mod policy;
mod simplex;

pub use dataset::Dataset;
pub use joint::{
    empirical_joint, empirical_joint_k, validate, DiscreteJoint, ValidationReport, Violation,
    NORMALIZATION_TOL,
};
pub use model::{sigmoid, softplus, ModelKind, ScoreModel};
pub use policy::{Policy, POLICY_TOL};
pub use simplex::{
    chi2, chi2_prox, on_simplex, project_chi2_simplex, project_simplex, SimplexWeights,
    SIMPLEX_TOL,
};

use serde::{Deserialize, Serialize};

/// Evaluation of hard predictions (`score > 0`) on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub accuracy: f64,
    pub ddp: f64,
    pub deo: f64,
    /// `NR(s) = P(Ŷ = 0 | S = s)`.
    pub nr: Vec<f64>,
    pub group_accuracy: Vec<f64>,
}
