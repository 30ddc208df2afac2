use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Library error type. Variants map onto the CLI exit-code categories:
/// I/O, format, model violation, verification failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("verification failure: {0}")]
    Verification(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
