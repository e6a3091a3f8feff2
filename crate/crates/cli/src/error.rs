use std::io;
use std::path::{Path, PathBuf};

use daxiot_broker::{ClientError, ConfigError, StartError};
use daxiot_core::credential::CredentialError;
use daxiot_core::crypto::CryptoError;
use daxiot_core::did::DidError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Did(#[from] DidError),
    #[error(transparent)]
    Credential(#[from] CredentialError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Start(#[from] StartError),
    #[error("{0}")]
    Usage(String),
    #[error("failed at step {step}: {class}")]
    Step { step: char, class: String },
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Start(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Start(e) => e.exit_code(),
            _ => 1,
        }
    }
}

/// Attaches `path` to an I/O error.
pub(crate) fn at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
