use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] endpointbench_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}:{line}: column `{column}`: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        msg: String,
    },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("snapshot {version} was built against registry {found}, but the loaded registry hashes to {expected}")]
    RegistryMismatch {
        version: String,
        found: String,
        expected: String,
    },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }

    /// Process exit code: 1 for usage errors, 2 for everything data-related.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}
