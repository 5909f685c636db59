use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs are individually valid but do not fit together.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A non-finite value appeared while stepping.
    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: String },
    /// The solution blew up past the instability threshold.
    #[error("instability at step {step} (t = {time}): sup norm {norm:e} exceeds {limit:e}")]
    Unstable {
        step: usize,
        time: f64,
        norm: f64,
        limit: f64,
    },
    /// An ensemble member failed; the seed identifies the run.
    #[error("run with seed {seed} failed: {source}")]
    Member {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::Unstable { .. } => true,
            Error::Member { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
