use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a precondition. `field` names the
    /// offending setting so callers can attribute the failure.
    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },

    /// An input value lies outside the domain an operation is defined on.
    #[error("input out of domain: {0}")]
    Domain(String),

    /// The operation is undefined for the given input (e.g. zero total energy).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An API was called out of order.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes the field of a config error, e.g. `wavelength` becomes
    /// `optics.wavelength`. Other variants pass through unchanged.
    pub fn within(self, scope: &str) -> Self {
        match self {
            Error::Config { field, message } => Error::Config {
                field: format!("{scope}.{field}"),
                message,
            },
            other => other,
        }
    }
}
