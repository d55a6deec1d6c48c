//! Crate-wide error type with CLI exit-code mapping.

use thiserror::Error;

/// Errors produced by the library and CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// Input vector length does not match the expected dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A computation produced a non-finite value.
    #[error("non-finite value in {context} at index {index}")]
    NumericalOverflow { context: &'static str, index: usize },

    /// Fixed-point iteration did not converge within the iteration cap.
    #[error("fixed-point iteration failed to converge (last residual {residual:.3e})")]
    NoConvergence { residual: f64 },

    /// Adaptive step size collapsed below the representable minimum.
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    /// Convergence-order fit rejected: errors at or below the noise floor.
    #[error("unreliable order fit: error {min_error:.3e} at h = {h} is below the noise floor")]
    UnreliableFit { min_error: f64, h: f64 },

    /// A learned-field rollout left the admissible region.
    #[error("trajectory diverged at step {step} (|y| > {bound:.1e})")]
    Divergence { step: usize, bound: f64 },

    /// Invalid configuration or arguments.
    #[error("{0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// CLI exit code: 1 for validation/configuration problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 1,
            Error::NumericalOverflow { .. }
            | Error::NoConvergence { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::UnreliableFit { .. }
            | Error::Divergence { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that a state vector has the expected length.
pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
