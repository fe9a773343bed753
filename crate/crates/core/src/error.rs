use thiserror::Error;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("outside the domain of the formula: {0}")]
    Domain(String),

    #[error("malformed photon stream: {0}")]
    MalformedStream(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("fit did not converge after {iterations} iterations (last iterate {last:?})")]
    NonConvergence { iterations: usize, last: Vec<f64> },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. }
            | Error::Domain(_)
            | Error::MalformedStream(_)
            | Error::Config(_) => ErrorKind::Validation,
            Error::Io { .. } => ErrorKind::Io,
            Error::Degenerate(_) | Error::DegenerateFit(_) | Error::NonConvergence { .. } => {
                ErrorKind::Numerical
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
