use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command line to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numerical => "numerical",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("degenerate jurisdiction `{jurisdiction}`: {reason}")]
    DegenerateJurisdiction { jurisdiction: String, reason: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("incidence change stays positive up to chi = {cap} at gamma = {gamma}")]
    NoSignChange { gamma: f64, cap: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("missing config keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),

    #[error("{path}: line {line}: {message}")]
    Row {
        path: String,
        line: u64,
        message: String,
    },

    #[error("data: {0}")]
    Data(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::MissingKeys(_) => ErrorKind::Config,
            Error::InvalidParameter { .. }
            | Error::DegenerateJurisdiction { .. }
            | Error::Row { .. }
            | Error::Data(_)
            | Error::Io { .. } => ErrorKind::Data,
            Error::Singular(_) | Error::NonFinite(_) | Error::NoSignChange { .. } => {
                ErrorKind::Numerical
            }
        }
    }
}

/// Rejects NaN and infinities with a message naming the quantity.
pub(crate) fn ensure_finite(what: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(format!("{what} = {x}")))
    }
}
