use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto its exit-code contract:
/// config/usage problems exit 2, domain failures exit 1, numeric failures 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("singular factorization at row {row} (node i={i}, j={j})")]
    SingularFactorization { row: usize, i: usize, j: usize },

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("solution blow-up at step {step}: max |u| = {max_abs:e}")]
    BlowUp { step: usize, max_abs: f64 },

    #[error("NaN sample in Monte Carlo path {path} (seed {seed})")]
    McNan { seed: u64, path: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
