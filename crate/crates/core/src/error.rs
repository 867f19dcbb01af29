use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("singular local system at core {core}; use a positive ridge (als.ridge > 0)")]
    SingularSystem { core: usize },

    #[error("step {step} of iteration {iteration} failed: {source}")]
    Step {
        iteration: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("bad input data: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// `2` for configuration and usage problems, `3` for numerical failures,
    /// `1` for everything else (I/O, malformed inputs).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Numerical(_) | Error::SingularSystem { .. } => 3,
            Error::Step { source, .. } => match source.exit_code() {
                2 => 2,
                _ => 3,
            },
            Error::Shape(_) | Error::Checkpoint(_) | Error::Data(_) | Error::Io { .. } => 1,
        }
    }
}
