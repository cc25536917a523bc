use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] cglwaves::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl CliError {
    /// 2 for usage and parameter errors, 3 for solver failures, 4 for
    /// partial results.
    pub fn exit_code(&self) -> u8 {
        use cglwaves::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Json { .. } => 2,
            CliError::Solver(e) => match e {
                E::BadParameter(_)
                | E::GridTooCoarse { .. }
                | E::FieldGridMismatch
                | E::WrongDomain(_)
                | E::WrongNormalization(_)
                | E::TargetOutsideRange(_)
                | E::Io(_)
                | E::Parse(_) => 2,
                E::StepUnderflow { .. } => 4,
                E::NonConvergence { .. }
                | E::NegativeSolution { .. }
                | E::SingularBorderedSystem
                | E::NumericalBlowup { .. }
                | E::SingularMatrix(_) => 3,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
