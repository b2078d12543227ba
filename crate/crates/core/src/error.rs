use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("active-set loop did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("corner at ({x}, {y}) has no feasible outgoing direction")]
    EmptyCone { x: f64, y: f64 },

    #[error("no feasible polygonal path between the endpoints")]
    NoPath,

    #[error("polygon has zero total length but {segments} segments")]
    ZeroLength { segments: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("profile mismatch: {0}")]
    ProfileMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code: 1 for input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation(_) | Error::InvalidArgument(_) | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
