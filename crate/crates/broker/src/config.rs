//! Broker configuration file and startup validation.

use std::io;
use std::path::{Path, PathBuf};

use daxiot_core::credential::{CredentialError, RevocationRegistry, TrustedIssuerList};
use daxiot_core::crypto::SigningKeyPair;
use daxiot_core::did::{Did, DidError, ResolverRegistry};
use daxiot_core::protocol::BrokerIdentity;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trust::FileTrust;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read signing key {path}: {source}")]
    Key { path: PathBuf, source: io::Error },
    #[error("broker DID {did} does not resolve: {source}")]
    Resolution { did: Did, source: DidError },
    #[error("signing key does not match the document of {0}")]
    KeyMismatch(Did),
    #[error("trust files: {0}")]
    Trust(#[from] CredentialError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    #[default]
    Info,
    Debug,
}

impl std::str::FromStr for LogLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown log level {s:?}"))
    }
}

/// Contents of the broker's JSON config file. Relative paths are taken
/// relative to the directory holding the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrokerConfig {
    pub listen_address: String,
    pub broker_did: Did,
    pub signing_key_path: PathBuf,
    pub til_path: PathBuf,
    pub rr_path: PathBuf,
    pub did_web_dir: PathBuf,
    #[serde(default)]
    pub log_level: LogLevel,
}

/// Everything a broker needs, checked against each other.
#[derive(Debug)]
pub struct Validated {
    pub identity: BrokerIdentity,
    pub registry: ResolverRegistry,
    pub trust: FileTrust,
}

impl BrokerConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: Self = serde_json::from_slice(&bytes)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Ok(config.relative_to(base))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        daxiot_core::write_atomic(path.as_ref(), text.as_bytes())
    }

    fn relative_to(mut self, base: &Path) -> Self {
        for p in [
            &mut self.signing_key_path,
            &mut self.til_path,
            &mut self.rr_path,
            &mut self.did_web_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }

    /// Loads the key, resolves the broker's own document and reads both
    /// trust files once. A broker whose key does not match its published
    /// document must not start: clients would fail step E against it.
    pub fn validate(&self) -> Result<Validated, ConfigError> {
        let key = SigningKeyPair::read_seed_file(&self.signing_key_path).map_err(|source| ConfigError::Key {
            path: self.signing_key_path.clone(),
            source,
        })?;
        let registry = ResolverRegistry::directory(&self.did_web_dir);
        let doc = registry.resolve(&self.broker_did).map_err(|source| ConfigError::Resolution {
            did: self.broker_did.clone(),
            source,
        })?;
        let identity = BrokerIdentity::new(self.broker_did.clone(), &key);
        if !identity.matches_document(&doc) {
            return Err(ConfigError::KeyMismatch(self.broker_did.clone()));
        }
        TrustedIssuerList::load(&self.til_path)?;
        RevocationRegistry::load(&self.rr_path)?;
        Ok(Validated {
            identity,
            registry,
            trust: FileTrust::new(&self.til_path, &self.rr_path),
        })
    }
}
