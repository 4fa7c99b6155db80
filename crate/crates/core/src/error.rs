use thiserror::Error;

/// Errors raised by the construction and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input violates a documented precondition (for example, a state set
    /// that is not pairwise orthogonal).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A search exceeded its fixed budget.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// A numerical self-check failed. This almost always means a tolerance is
    /// too loose or too tight for the input at hand.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("linear algebra backend: {0}")]
    Backend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
