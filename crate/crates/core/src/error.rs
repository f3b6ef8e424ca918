use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("vocabulary error: {0}")]
    Vocabulary(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite cost at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("unknown image ids: {}", .0.join(", "))]
    UnknownImages(Vec<String>),
    #[error("http error: {0}")]
    Http(String),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
