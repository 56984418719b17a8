use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] cpath_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: malformed instance file: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}: invalid instance: {reason}", path.display())]
    InvalidFile { path: PathBuf, reason: String },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// 2 for anything the caller got wrong, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use cpath_core::Error as C;
        match self {
            Error::Core(C::UnknownInstance { .. } | C::InvalidArgument(_) | C::Dimension { .. }) => 2,
            Error::Core(_) => 1,
            Error::Io { .. } | Error::Json { .. } | Error::InvalidFile { .. } | Error::Usage(_) => 2,
        }
    }
}
