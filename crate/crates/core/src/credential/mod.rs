//! Authorization credentials as SD-JWTs.
//!
//! An issuer (device owner) signs a JWT whose payload carries only salted
//! digests of per-broker claims. The holder keeps the disclosures and, when
//! connecting to a broker, reveals just the disclosure keyed on that broker's
//! DID. The broker verifies in a fixed order:
//!
//! 1. `sub` equals the authenticated static DID of the client
//! 2. `iss` is on the trusted issuer list
//! 3. the issuer document resolves and the signature verifies
//! 4. `jti` is not revoked
//! 5. every presented disclosure digest appears in `_sd`
//! 6. claims keyed on the verifying broker become the grant
//!
//! A failure at step `k` never reports an error from a later step.

mod claim;
mod disclosure;
mod presentation;
mod registry;
mod sdjwt;

pub use claim::{AuthorizationClaim, AuthorizationGrant, ClaimTopics};
pub use disclosure::{hash_disclosure, Disclosure};
pub use presentation::{present, verify_presentation, Presentation};
pub use registry::{RevocationRegistry, RevocationStatus, TrustedIssuerList};
pub use sdjwt::{issue, CredentialPayload, SdJwtCredential, CREDENTIAL_TYPE};

use thiserror::Error;

use crate::did::DidError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CredentialError {
    #[error("credential must carry at least one claim")]
    EmptyClaims,
    #[error("invalid claim: {0}")]
    InvalidClaim(String),
    #[error("malformed credential: {0}")]
    Malformed(String),
    #[error("no disclosure matches the selected broker")]
    NothingToPresent,
    #[error("credential subject does not match the authenticated client")]
    SubjectMismatch,
    #[error("issuer is not trusted")]
    UntrustedIssuer,
    #[error("issuer DID could not be resolved: {0}")]
    IssuerResolution(DidError),
    #[error("credential signature is invalid")]
    BadSignature,
    #[error("credential has been revoked")]
    Revoked,
    #[error("presented disclosure is not part of the credential")]
    UnknownDisclosure,
    #[error("registry file error: {0}")]
    Registry(String),
}

impl CredentialError {
    /// Position in the verification sequence; 0 for parse-level failures.
    pub fn step(&self) -> u8 {
        match self {
            CredentialError::SubjectMismatch => 1,
            CredentialError::UntrustedIssuer => 2,
            CredentialError::IssuerResolution(_) | CredentialError::BadSignature => 3,
            CredentialError::Revoked => 4,
            CredentialError::UnknownDisclosure => 5,
            _ => 0,
        }
    }
}
