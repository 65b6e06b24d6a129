use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown kernel family `{0}`")]
    UnknownKernel(String),

    #[error("unknown distribution `{0}`")]
    UnknownDistribution(String),

    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("missing input: {0}")]
    MissingInput(&'static str),

    #[error("kernel has no separable expansion")]
    MissingSeparable,

    #[error("non-finite kernel value h({x}, {y}) = {value}")]
    NonFiniteKernel { x: f64, y: f64, value: f64 },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("{what} did not converge in {iterations} iterations")]
    NotConverged {
        what: &'static str,
        iterations: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 for configuration errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteKernel { .. } | Error::NotConverged { .. } | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
