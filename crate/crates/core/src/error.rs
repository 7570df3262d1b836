use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Inputs outside the range the sieve can represent or afford.
    #[error("range error: {0}")]
    Range(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The request exceeds the configured work budget.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("ill-conditioned fit: {0}")]
    Conditioning(String),

    #[error("Laurent data of order {available} is insufficient; order {required} is required")]
    InsufficientOrder { required: usize, available: usize },

    #[error("domain error: {0}")]
    Domain(String),
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
