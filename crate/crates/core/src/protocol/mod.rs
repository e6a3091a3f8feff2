//! Packets, wire framing and the handshake/messaging state machines.
//!
//! Message flow between a client (publisher or subscriber) and a broker:
//!
//! | step | direction | packet        | content                                   |
//! |------|-----------|---------------|-------------------------------------------|
//! | A-B  | C → B     | Connect       | ephemeral DID, `enc_ES(static DID)`       |
//! | C-D  | B → C     | AuthChallenge | `enc_1PU(N_P)`                            |
//! | E-F  | C → B     | AuthResponse  | `enc_1PU[N_P](presentation)`              |
//! | G-H  | B → C     | ConnAck       | broker outbound nonce prefix              |
//! | I    | C → B     | Subscribe     | `enc_1PU[N_P+k](topic)`                   |
//! | J    | C → B → C | Publish       | `enc[n](topic)`, `enc[n+1](payload)`      |
//!
//! Every envelope uses `kind byte || ephemeral DID` as associated data. The
//! client→broker direction continues the counter of `N_P`; the broker→client
//! direction uses the prefix announced in ConnAck, starting at counter 1.

mod broker;
mod client;
mod packet;
mod topics;

pub use broker::{
    broker_handle_connect, BrokerCore, BrokerIdentity, BrokerPhase, BrokerSession, Outcome,
    PublishDecision, ReplayCache, StaticTrust, TrustSource,
};
pub use client::{ClientPhase, ClientSession};
pub use packet::{
    aad, tag, Frame, Packet, PacketKind, ReasonCode, WireError, AUTH_METHOD, MAX_FRAME_LEN,
};
pub use topics::TopicTable;

use thiserror::Error;

use crate::credential::CredentialError;
use crate::crypto::CryptoError;
use crate::did::DidError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("wire format: {0}")]
    Wire(#[from] WireError),
    #[error("authentication method {0:?} is not supported")]
    ProtocolMismatch(String),
    #[error("{got:?} is not valid while {phase}")]
    OutOfOrder {
        got: PacketKind,
        phase: &'static str,
    },
    #[error("replayed or out-of-sequence nonce")]
    Replay,
    #[error("client could not be authenticated")]
    ClientAuthentication,
    #[error("broker could not be authenticated")]
    BrokerAuthentication,
    #[error("integrity violation")]
    Integrity,
    #[error("receive counter did not increase")]
    CounterRegression,
    #[error("a session for this ephemeral DID already exists")]
    DuplicateSession,
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("broker answered {kind:?} with {reason:?}")]
    Rejected {
        kind: PacketKind,
        reason: ReasonCode,
    },
    #[error(transparent)]
    Credential(#[from] CredentialError),
    #[error("DID resolution: {0}")]
    Resolution(#[from] DidError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

impl ProtocolError {
    /// Coarse code sent on the wire for this failure.
    pub fn reason_code(&self) -> ReasonCode {
        match self {
            ProtocolError::Credential(_) => ReasonCode::NotAuthorized,
            _ => ReasonCode::ProtocolError,
        }
    }

    /// Short stable name of the failure, e.g. `Replay` or `Revoked`.
    pub fn class(&self) -> &'static str {
        match self {
            ProtocolError::Wire(_) => "Wire",
            ProtocolError::ProtocolMismatch(_) => "ProtocolMismatch",
            ProtocolError::OutOfOrder { .. } => "OutOfOrder",
            ProtocolError::Replay => "Replay",
            ProtocolError::ClientAuthentication => "ClientAuthentication",
            ProtocolError::BrokerAuthentication => "BrokerAuthentication",
            ProtocolError::Integrity => "Integrity",
            ProtocolError::CounterRegression => "CounterRegression",
            ProtocolError::DuplicateSession => "DuplicateSession",
            ProtocolError::Malformed(_) => "Malformed",
            ProtocolError::Rejected { reason, .. } => match reason {
                ReasonCode::NotAuthorized => "NotAuthorized",
                _ => "Rejected",
            },
            ProtocolError::Credential(e) => match e {
                CredentialError::EmptyClaims => "EmptyClaims",
                CredentialError::InvalidClaim(_) => "InvalidClaim",
                CredentialError::Malformed(_) => "MalformedCredential",
                CredentialError::NothingToPresent => "NothingToPresent",
                CredentialError::SubjectMismatch => "SubjectMismatch",
                CredentialError::UntrustedIssuer => "UntrustedIssuer",
                CredentialError::IssuerResolution(_) => "IssuerResolution",
                CredentialError::BadSignature => "BadSignature",
                CredentialError::Revoked => "Revoked",
                CredentialError::UnknownDisclosure => "UnknownDisclosure",
                CredentialError::Registry(_) => "Registry",
            },
            ProtocolError::Resolution(_) => "Resolution",
            ProtocolError::Crypto(CryptoError::NonceOverflow) => "NonceOverflow",
            ProtocolError::Crypto(_) => "Crypto",
        }
    }
}
