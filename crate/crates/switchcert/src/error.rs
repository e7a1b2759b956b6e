use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("singular matrix")]
    Singular,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("undeclared variable `{0}`")]
    UndeclaredVar(String),
    #[error("infeasible or undecided: {0}")]
    Infeasible(String),
    #[error("pair (A_{0}, D_{0}) is not observable (rank {1} < {2})")]
    Unobservable(usize, usize, usize),
    #[error("design failure: {0}")]
    Design(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
