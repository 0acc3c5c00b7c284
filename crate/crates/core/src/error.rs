use thiserror::Error;

/// Errors raised by the numerical core, the networks and the experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },

    #[error("jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("matrix is not circulant: max row-shift deviation {max_deviation:e}")]
    NotCirculant { max_deviation: f64 },

    #[error("kernel matrix is not positive semi-definite: eigenvalue {eigenvalue:e}")]
    NotPsd { eigenvalue: f64 },

    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    #[error("q-iteration did not converge in {iterations} iterations (residual {residual:e})")]
    QIterationLimit { iterations: usize, residual: f64 },

    #[error("no reachable start/goal layout after {retries} attempts")]
    Unreachable { retries: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Contract {
        op,
        detail: detail.into(),
    }
}

pub(crate) fn mismatch(op: &'static str, detail: impl Into<String>) -> Error {
    Error::DimensionMismatch {
        op,
        detail: detail.into(),
    }
}
