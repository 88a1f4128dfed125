use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration document did not match the expected schema.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// A structurally valid configuration violates a model condition.
    #[error("invalid system: {condition} violated: {detail}")]
    Invariant {
        condition: &'static str,
        detail: String,
    },

    /// A computation would exceed its configured size or work cap.
    #[error("budget exceeded for {what}: requested {requested}, cap {cap}")]
    Budget {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    /// The joint constraint of a ratio law rejected every candidate draw.
    #[error("rejection sampling failed after {attempts} attempts (infeasible constraint region?)")]
    RejectionFailure { attempts: u64 },

    /// The pressure function could not be bracketed because some ratio is not a contraction.
    #[error("non-contracting system: alpha_hi = {alpha_hi} must be < 1")]
    NonContraction { alpha_hi: f64 },

    /// Root bracketing or another numeric routine failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A regression had no spread in its response.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("operation requires ambient dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error category; the CLI maps each onto a distinct exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Schema,
    Budget,
    Numeric,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Schema { .. }
            | Error::Invariant { .. }
            | Error::Dimension { .. }
            | Error::Argument(_) => ErrorKind::Schema,
            Error::Budget { .. } => ErrorKind::Budget,
            Error::RejectionFailure { .. }
            | Error::NonContraction { .. }
            | Error::Numeric(_)
            | Error::DegenerateFit(_) => ErrorKind::Numeric,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn invariant(condition: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            condition,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
