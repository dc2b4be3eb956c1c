use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain error: {0}")]
    ParameterDomain(String),

    #[error("value {value} outside the support of marginal {dim}")]
    TransformDomain { dim: usize, value: f64 },

    #[error("Sobol sequence supports at most {max} dimensions, requested {requested}")]
    UnsupportedDimension { requested: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("argument {0} outside [-1, 1]")]
    OutOfDomain(f64),

    #[error("non-finite {what} at sample {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigenvalue spectrum is identically zero")]
    NoVariability,

    #[error("correlation matrix is not positive definite after nugget escalation")]
    NotPositiveDefinite,

    #[error("truss stiffness matrix is singular (mechanism)")]
    Mechanism,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("limit-state evaluation failed: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
