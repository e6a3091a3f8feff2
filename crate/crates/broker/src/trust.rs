//! Trust anchors read from disk on every handshake.

use std::path::{Path, PathBuf};

use daxiot_core::credential::{CredentialError, RevocationRegistry, TrustedIssuerList};
use daxiot_core::protocol::TrustSource;

/// TIL and RR files, re-read for each AuthResponse so that `til-add`,
/// `til-remove` and `revoke` apply to the next connect without a restart.
///
/// An unreadable revocation registry fails the handshake: accepting a
/// credential because its revocation status is unknown would be fail-open.
#[derive(Debug, Clone)]
pub struct FileTrust {
    til_path: PathBuf,
    rr_path: PathBuf,
}

impl FileTrust {
    pub fn new(til_path: impl AsRef<Path>, rr_path: impl AsRef<Path>) -> Self {
        Self {
            til_path: til_path.as_ref().to_path_buf(),
            rr_path: rr_path.as_ref().to_path_buf(),
        }
    }
}

impl TrustSource for FileTrust {
    fn load(&self) -> Result<(TrustedIssuerList, RevocationRegistry), CredentialError> {
        Ok((TrustedIssuerList::load(&self.til_path)?, RevocationRegistry::load(&self.rr_path)?))
    }
}
