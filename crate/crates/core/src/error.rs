use thiserror::Error;

/// Errors raised by tube construction, fitting and certification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// A configuration that is well-formed but refused (size guards, unsupported modes).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failed with status {status}: {detail}")]
    Solver { status: String, detail: String },

    /// The requested fit has no finite optimum.
    #[error("unbounded fit at timestep {k}, axis {axis}: samples carry no spread along this axis")]
    Unbounded { k: usize, axis: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
