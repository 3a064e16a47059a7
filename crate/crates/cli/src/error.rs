use std::path::Path;

use gaslab_core::instrument::CsvError;
use thiserror::Error;

/// Command failure; the variant picks the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed inputs. Exit 2.
    #[error("{0}")]
    Input(String),
    /// Output could not be written. Exit 3.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn input(msg: impl std::fmt::Display) -> Self {
        CliError::Input(msg.to_string())
    }

    pub(crate) fn csv(path: &Path, e: CsvError) -> Self {
        if e.is_input_error() {
            CliError::Input(format!("{}: {e}", path.display()))
        } else {
            CliError::Io(format!("{}: {e}", path.display()))
        }
    }
}

/// Reads an input file; any failure is an input error.
pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn read_input_string(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_input(path)?).map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))
}
