use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(
        "Gram matrix is ill-conditioned: smallest eigenvalue {min_eigenvalue:e} <= cutoff {cutoff:e}; use a larger delta"
    )]
    Conditioning { min_eigenvalue: f64, cutoff: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
