use std::path::PathBuf;

use smtad_core::training::TrainError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Exit status for input problems (bad files, flags, shapes).
pub const EXIT_INPUT: i32 = 2;
/// Exit status for numerical failures (degenerate scores, divergence).
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] smtad_core::Error),

    #[error(transparent)]
    Train(#[from] TrainError),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        use smtad_core::Error as E;
        match self {
            CliError::Core(E::Degenerate { .. } | E::NonFiniteGradient { .. }) => EXIT_NUMERICAL,
            CliError::Train(TrainError::Diverged { .. }) => EXIT_NUMERICAL,
            CliError::Train(TrainError::Core(E::Degenerate { .. } | E::NonFiniteGradient { .. })) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
