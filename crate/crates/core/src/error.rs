use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, malformed or out of range.
    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A subproblem of the offline design failed.
    #[error("{context}: {reason}")]
    Solver { context: String, reason: String },

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn solver(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Solver {
            context: context.into(),
            reason: reason.into(),
        }
    }

    /// Adds an outer context to a solver error, leaves other kinds untouched.
    pub fn within(self, outer: &str) -> Self {
        match self {
            Error::Solver { context, reason } => Error::Solver {
                context: format!("{outer}: {context}"),
                reason,
            },
            Error::Geometry(msg) => Error::solver(outer, format!("geometry: {msg}")),
            Error::Numeric(msg) => Error::solver(outer, format!("numeric failure: {msg}")),
            other => other,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::UnknownScheme(_))
    }
}
