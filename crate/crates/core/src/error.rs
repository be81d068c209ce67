use thiserror::Error;

/// Errors raised by the simulation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A runtime value violated an operation precondition.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// The run configuration failed to parse or validate. `path` is the
    /// dotted key of the offending field.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// The requested track parameters cannot form a closed loop.
    #[error("track closure impossible: {0}")]
    Closure(String),

    /// A safety or consistency invariant failed during a run.
    #[error("runtime invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status: 2 for configuration problems, 1 for everything
    /// else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Rejects non-finite or non-positive values.
pub(crate) fn require_positive(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_finite(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("must be finite, got {value}")))
    }
}
