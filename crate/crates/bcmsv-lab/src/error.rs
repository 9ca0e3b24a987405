use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    /// Multi-start estimation finished without any restart passing the
    /// convergence and feasibility checks. Carries the per-restart
    /// diagnostics so callers can inspect what happened.
    #[error("no restart converged ({} restarts, best value {best_value:e}, best residual {best_residual:e})", per_restart_values.len())]
    NoConvergedRestart {
        per_restart_values: Vec<f64>,
        kkt_residuals: Vec<f64>,
        best_value: f64,
        best_residual: f64,
    },

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
