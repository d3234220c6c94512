use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver budget of {budget} node expansions exceeded")]
    SolverBudget { budget: u64 },
    #[error("enumeration bound exceeded: {0}")]
    Bound(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("data validation failed: {0}")]
    DataValidation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("checksum mismatch for {path}: expected {expected}, found {found}")]
    Checksum {
        path: String,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
