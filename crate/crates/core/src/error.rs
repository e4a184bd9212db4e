use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Inconsistent model configuration (e.g. schedule mode vs family).
    #[error("configuration error: {0}")]
    Config(String),
    /// Quadrature or root finding failed to reach its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Too many replications overflowed `exp(mu + t x)`.
    #[error("overflow in {flagged} of {n_reps} replications (N = {n})")]
    Overflow { n: u64, flagged: usize, n_reps: usize },
    /// A location/scale fit could not be performed.
    #[error("fit error: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by invalid inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Precondition(_) | Error::Config(_)
        )
    }
}
