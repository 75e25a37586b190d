use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A line of an input file could not be decoded at all.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A decoded value violates the range or consistency rules of a
    /// specific field.
    #[error("invalid value for `{field}`: {msg}")]
    InvalidField { field: String, msg: String },

    /// A precondition of an operation was violated (out-of-range id,
    /// mismatched lengths, overlapping intervals, ...).
    #[error("{0}")]
    Domain(String),

    /// Training produced a NaN or infinite loss.
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn field(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad input rather than runtime failure.
    /// The CLI maps these to exit code 2, everything else to 3.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidField { .. }
                | Error::Domain(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
