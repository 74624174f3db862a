use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
///
/// `Invalid` covers rejected constructions and bad arguments, `Parse` covers
/// malformed input files (with a location), and `Internal` marks states that
/// indicate a bug rather than bad input. The CLI maps `Internal` to exit
/// code 2 and everything else to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {kind}: {message}")]
    Invalid {
        kind: &'static str,
        message: String,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("internal invariant violation: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            kind,
            message: message.into(),
        }
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
