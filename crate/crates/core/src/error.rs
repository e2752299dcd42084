use thiserror::Error;

/// Errors produced by the estimation, theory and I/O layers.
#[derive(Debug, Error)]
pub enum CoxError {
    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no events in the data (all subjects censored)")]
    NoEvents,

    #[error("no comparable pairs for the concordance index")]
    NoComparablePairs,

    #[error("null model: no active coefficients, tau_hat is undefined")]
    NullModel,

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite value in {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },

    #[error("replica-symmetric inconsistency: {0}")]
    RsInconsistency(String),

    #[error("root finding failed: {0}")]
    RootBracket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoxError>;

impl CoxError {
    /// Whether the failure comes from the numerics rather than from the
    /// caller's input or the file system.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            CoxError::InvalidInput(_) | CoxError::Io(_) | CoxError::Csv(_) | CoxError::Json(_)
        )
    }
}
