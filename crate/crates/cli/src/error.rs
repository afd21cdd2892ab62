use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] admission_core::Error),

    #[error("{}: {source}", path.display())]
    Config {
        path: PathBuf,
        source: admission_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// Invalid flag or spec combination.
    #[error("{0}")]
    Usage(String),

    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    /// Process exit code: 2 for validation failures, 3 for guard refusals,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use admission_core::Error as E;
        let core = match self {
            Self::Core(e) | Self::Config { source: e, .. } => Some(e),
            _ => None,
        };
        match (self, core) {
            (_, Some(E::InvalidConfig(_) | E::Parse { .. } | E::Domain(_))) => 2,
            (_, Some(E::GuardRefusal(_))) => 3,
            (Self::Usage(_), _) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
