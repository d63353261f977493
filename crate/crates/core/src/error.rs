use thiserror::Error;

/// Errors raised by the numerical operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model parameters violate an existence condition such as `Hd < 1`.
    #[error("regime error: {0}")]
    Regime(String),

    /// A covariance matrix could not be factorized even after jitter.
    #[error("matrix is not positive semidefinite (n = {size}, last jitter = {jitter:e})")]
    NonPsd { size: usize, jitter: f64 },

    /// A computation would exceed the enforced size limits.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    /// A function does not satisfy the RKHS membership preconditions.
    #[error("membership violation: {0}")]
    Membership(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }
}
