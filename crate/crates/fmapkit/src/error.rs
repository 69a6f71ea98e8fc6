use std::path::PathBuf;

use fmapkit_core::adapt::AdaptOutcome;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("no usable input: {0}")]
    EmptyInput(String),
    /// Adaptation stopped on a non-finite loss; the last good state is kept.
    #[error("adaptation aborted at step {step}: non-finite loss")]
    AdaptAborted { step: usize, last_good: Box<AdaptOutcome> },
    #[error("adaptation trace increased at step {step}: {previous} -> {current}")]
    TraceNotMonotone { step: usize, previous: f64, current: f64 },
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] fmapkit_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit status: 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AdaptAborted { .. } | Error::TraceNotMonotone { .. } | Error::ChecksFailed { .. } => 3,
            Error::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}
