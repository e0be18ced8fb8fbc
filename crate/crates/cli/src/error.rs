use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] flownav::Error),

    #[error("INVALID_INPUT: {0}")]
    Input(String),

    #[error("NOT_CONVERGED: {0}")]
    NotConverged(String),

    #[error("IO: {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// 0 ok, 2 input or validation, 3 not converged, 4 no path, 5 numeric failure.
    pub fn exit_code(&self) -> u8 {
        use flownav::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::NoPath | E::Unreachable(_) | E::NotArrived(_) => 4,
                E::Diverged(..) | E::NonFinite(_) => 5,
                _ => 2,
            },
            CliError::NotConverged(_) => 3,
            CliError::Input(_) | CliError::Io { .. } => 2,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Input(_) => "INVALID_INPUT",
            CliError::NotConverged(_) => "NOT_CONVERGED",
            CliError::Io { .. } => "IO",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> CliResult<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> CliResult<T> {
        self.map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })
    }
}
