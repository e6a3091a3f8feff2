use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CredentialError;
use crate::did::Did;

/// Issuers a broker accepts credentials from. Stored as a JSON array of DID
/// strings; insertion order is preserved so add/remove round-trips the file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrustedIssuerList {
    members: Vec<Did>,
}

impl TrustedIssuerList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, did: &Did) -> bool {
        self.members.contains(did)
    }

    /// Returns false if already present.
    pub fn add(&mut self, did: Did) -> bool {
        if self.contains(&did) {
            return false;
        }
        self.members.push(did);
        true
    }

    pub fn remove(&mut self, did: &Did) -> bool {
        let before = self.members.len();
        self.members.retain(|m| m != did);
        before != self.members.len()
    }

    pub fn members(&self) -> &[Did] {
        &self.members
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CredentialError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| registry_err(path, e))?;
        let mut til: Self = serde_json::from_slice(&bytes).map_err(|e| registry_err(path, e))?;
        // Duplicates in a hand-edited file collapse to one entry.
        let mut seen = Vec::new();
        til.members.retain(|d| {
            let fresh = !seen.contains(d);
            seen.push(d.clone());
            fresh
        });
        Ok(til)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CredentialError> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("TIL serializes");
        text.push('\n');
        crate::write_atomic(path, text.as_bytes()).map_err(|e| registry_err(path, e))
    }
}

impl FromIterator<Did> for TrustedIssuerList {
    fn from_iter<I: IntoIterator<Item = Did>>(iter: I) -> Self {
        let mut til = Self::new();
        for d in iter {
            til.add(d);
        }
        til
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RevocationStatus {
    Active,
    Revoked,
}

/// Credential status keyed by `jti`. Absent means active; revocation is
/// permanent. File form: `{"<jti>": "REVOKED", ...}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RevocationRegistry {
    statuses: BTreeMap<String, RevocationStatus>,
}

impl RevocationRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn status(&self, jti: &str) -> RevocationStatus {
        self.statuses
            .get(jti)
            .copied()
            .unwrap_or(RevocationStatus::Active)
    }

    pub fn revoke(&mut self, jti: &str) {
        self.statuses
            .insert(jti.to_string(), RevocationStatus::Revoked);
    }

    pub fn revoked_count(&self) -> usize {
        self.statuses
            .values()
            .filter(|s| **s == RevocationStatus::Revoked)
            .count()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CredentialError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| registry_err(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| registry_err(path, e))
    }

    /// Like [`load`](Self::load) but a missing file is an empty registry.
    pub fn load_or_default(path: impl AsRef<Path>) -> Result<Self, CredentialError> {
        if path.as_ref().exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CredentialError> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("registry serializes");
        text.push('\n');
        crate::write_atomic(path, text.as_bytes()).map_err(|e| registry_err(path, e))
    }
}

fn registry_err(path: &Path, e: impl std::fmt::Display) -> CredentialError {
    CredentialError::Registry(format!("{}: {e}", path.display()))
}
