use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("sensitive group {group} has no samples or zero probability mass")]
    EmptyGroup { group: usize },
    #[error("positive joint mass on a cell whose product-marginal is zero (y={y}, s={s})")]
    SingularSupport { y: usize, s: usize },
    #[error("marginal has fewer than two support points with positive mass")]
    DegenerateMarginal,
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("dependence kind {0} is not supported here")]
    UnsupportedKind(String),
    #[error("training diverged at epoch {epoch}")]
    DivergedTraining { epoch: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no convergence after {iterations} iterations (violation {violation:e}, objective change {objective_change:e})")]
    ConvergenceFailure {
        iterations: usize,
        violation: f64,
        objective_change: f64,
    },
    #[error("perturbation {0} pushes probabilities out of (0, 1)")]
    InvalidPerturbation(f64),
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("parse error at data row {row}, column '{column}': {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
