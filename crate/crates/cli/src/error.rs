use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad configuration or a malformed input document.
    #[error("{0}")]
    Usage(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] reachtube::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use reachtube::Error as E;
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Core(E::Input(_) | E::Dimension { .. } | E::Config(_)) => 2,
            CliError::Core(E::Solver { .. } | E::Unbounded { .. } | E::Numerical(_)) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
