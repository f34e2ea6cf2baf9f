use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("trajectory {index}: {source}")]
    Trajectory { index: u64, source: lorentz_core::Error },
    #[error(transparent)]
    Core(#[from] lorentz_core::Error),
    #[error("dump line {line}: {message}")]
    Dump { line: usize, message: String },
}

impl Error {
    pub fn config(field: &str, message: impl std::fmt::Display) -> Self {
        Error::Config(format!("{field}: {message}"))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status for this error: 2 for usage and configuration
    /// problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
