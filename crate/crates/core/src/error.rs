use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or schema-violating input document.
    Input,
    /// A mathematical precondition does not hold for the given system.
    Precondition,
    /// An internal consistency check failed.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("system is not well-posed: K singular")]
    IllPosed,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no admissible s0 up to {s_max}: transfer function may be identically zero")]
    S0Exhausted { s_max: f64 },

    #[error("invalid wave speed: {0}")]
    InvalidSpeed(String),

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },

    #[error("initial state lies outside the output-nulling subspace (distance {distance:e})")]
    OutsideVstar { distance: f64 },

    #[error("consistency check failed: {0}")]
    Consistency(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. } | Error::Schema { .. } | Error::Io(_) => ErrorClass::Input,
            Error::Shape(_)
            | Error::Singular(_)
            | Error::IllPosed
            | Error::Unsupported(_)
            | Error::S0Exhausted { .. }
            | Error::InvalidSpeed(_)
            | Error::OutsideVstar { .. } => ErrorClass::Precondition,
            Error::NoConvergence { .. } | Error::Consistency(_) => ErrorClass::Internal,
        }
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}
