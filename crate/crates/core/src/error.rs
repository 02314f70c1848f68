use thiserror::Error;

/// Errors raised by every layer of the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge: {0}")]
    Convergence(String),

    #[error("step budget of {steps} exhausted at t = {t}")]
    StepBudget { t: f64, steps: usize },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("trajectory left the problem domain at t = {t} after {retries} step retries")]
    DomainExit { t: f64, retries: usize },

    #[error("degenerate data: {reason}")]
    DegenerateData {
        reason: String,
        floor_time: Option<f64>,
    },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Config(_) | Error::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
