use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge after {iterations} iterations (last iterate {last:?}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        last: Vec<f64>,
        residual: f64,
    },

    #[error("no region converged: {0}")]
    AllRegionsFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
