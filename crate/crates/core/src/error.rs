use thiserror::Error;

use crate::ode::NewtonStats;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "newton solver did not converge in {} iterations (residual {:e})",
        .stats.iterations,
        .stats.final_residual_norm
    )]
    NewtonNonConvergence { stats: NewtonStats },

    #[error("newton iteration diverged after {} iterations (non-finite residual)", .stats.iterations)]
    NewtonDivergence { stats: NewtonStats },

    #[error("singular jacobian in newton iteration {}", .stats.iterations)]
    SingularJacobian { stats: NewtonStats },

    #[error("inconsistent training data: {0}")]
    InconsistentData(String),

    #[error("integration failed for mu = {mu:?}, dt = {dt}: {message}")]
    Integration {
        mu: Vec<f64>,
        dt: f64,
        message: String,
    },

    #[error("cross validation failed: {0}")]
    CrossValidation(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Newton statistics carried by solver failures, if any.
    pub fn newton_stats(&self) -> Option<&NewtonStats> {
        match self {
            Error::NewtonNonConvergence { stats }
            | Error::NewtonDivergence { stats }
            | Error::SingularJacobian { stats } => Some(stats),
            _ => None,
        }
    }
}
