use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("cholesky factorization failed at leading minor {minor} (pivot {pivot:e})")]
    CholeskyFailure { minor: usize, pivot: f64 },

    #[error("circulant embedding has eigenvalue {value:e} at index {index}, below tolerance")]
    NegativeEigenvalue { index: usize, value: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}] (error estimate {estimate:e})")]
    QuadratureNonConvergence { lo: f64, hi: f64, estimate: f64 },

    #[error("degenerate estimator: {0}")]
    Degenerate(String),

    #[error("mode {mode} cannot be used: {reason}")]
    Mode { mode: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// True for failures of a numerical procedure on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CholeskyFailure { .. }
                | Error::NegativeEigenvalue { .. }
                | Error::QuadratureNonConvergence { .. }
                | Error::Degenerate(_)
        )
    }
}
