use thiserror::Error;

/// Errors raised by the release pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violates a structural precondition (bad tuple, unknown attribute, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A run was configured in a way that cannot be executed.
    #[error("configuration error: {0}")]
    Config(String),

    /// A mechanism invocation would push the ledger past its cap.
    #[error(
        "privacy budget exhausted: requested {requested} for `{label}` with {remaining} remaining"
    )]
    BudgetExhausted {
        label: String,
        requested: f64,
        remaining: f64,
    },

    /// A table would exceed the configured explicit-size cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Relative entropy is infinite because the approximation misses support of the data.
    #[error("infinite divergence at domain element {index}")]
    Divergence { index: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
}
