use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A factorization or optimization could not be carried out in floating point.
    /// `jitter` is the last diagonal jitter attempted, when one applies.
    #[error("numerical failure: {message}")]
    NumericalFailure { message: String, jitter: Option<f64> },

    /// The user objective failed or returned a non-finite value.
    #[error("objective failed at evaluation {iteration}: {message}")]
    Objective { iteration: usize, message: String },

    #[error("campaign not found: {0}")]
    NotFound(String),

    #[error("incompatible schema version {found} (expected {expected})")]
    IncompatibleVersion { found: u32, expected: u32 },

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            jitter: None,
        }
    }

    /// Prefixes the message with `context`, keeping the variant.
    pub fn context(self, context: impl std::fmt::Display) -> Self {
        match self {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{context}: {m}")),
            Error::NumericalFailure { message, jitter } => Error::NumericalFailure {
                message: format!("{context}: {message}"),
                jitter,
            },
            Error::Parse(m) => Error::Parse(format!("{context}: {m}")),
            Error::Conflict(m) => Error::Conflict(format!("{context}: {m}")),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
