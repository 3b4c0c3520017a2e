use std::path::Path;
use std::process::ExitCode;

use manifold_spc::Error;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    IllPosed(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::IllPosed(_) => 4,
            CliError::Runtime(_) => 5,
        })
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io(_) => CliError::Io(msg),
            Error::IllPosed { .. } => CliError::IllPosed(format!(
                "{msg}; embedding methods need more fitting points than ambient dimensions, use method \"mf\" when m_fit <= D"
            )),
            Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite { .. }
            | Error::InvalidK { .. }
            | Error::TooShort { .. }
            | Error::IndexOutOfRange { .. }
            | Error::EmptyCloud
            | Error::Parse { .. } => CliError::Validation(msg),
            _ => CliError::Runtime(msg),
        }
    }
}
