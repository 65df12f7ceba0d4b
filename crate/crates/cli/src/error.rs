use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A line of a text input that failed to parse or validate.
    #[error("{}:{line}: {msg}", path.display())]
    Line {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    /// A binary input rejected at a byte offset.
    #[error("{}: byte offset {offset}, field `{field}`: {msg}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        field: &'static str,
        msg: String,
    },
    #[error("config {}: {msg}", path.display())]
    Config { path: PathBuf, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("gradient check failed: {}", .0.join(", "))]
    GradCheck(Vec<String>),
    #[error(transparent)]
    Core(#[from] afen_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn line(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Self::Line {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    /// 2 for numerical failures (divergence, failed gradient checks), 1 for
    /// everything else.
    pub fn exit_code(&self) -> u8 {
        use afen_core::Error as E;
        match self {
            Self::GradCheck(_)
            | Self::Core(E::Diverged { .. } | E::NonFinite { .. } | E::NonFiniteAt { .. }) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
