//! File formats, checkpoints and configuration for `seqtag-core`, plus the
//! `seqtag` command-line tool.

pub mod checkpoint;
pub mod config;
pub mod conll;
pub mod embfile;
pub mod metrics_json;
pub mod pseudo;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Core(#[from] seqtag_core::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(String),
    #[error("checkpoint integrity: {0}")]
    Integrity(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code: 2 for data problems, 3 for configuration, 4 when
    /// training produced non-finite values.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Core(seqtag_core::Error::Config(_)) => 3,
            Error::Core(seqtag_core::Error::NonFinite { .. }) => 4,
            _ => 2,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }
}

pub fn read_file(path: impl Into<PathBuf>) -> Result<String> {
    let path = path.into();
    std::fs::read_to_string(&path).map_err(|source| Error::Io { path, source })
}

pub fn write_file(path: impl Into<PathBuf>, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = path.into();
    std::fs::write(&path, contents).map_err(|source| Error::Io { path, source })
}
