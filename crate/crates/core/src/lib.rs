//! Decentralized authentication and authorization for publish/subscribe IoT.
//!
//! Clients identify themselves with `did:key` identities and present
//! selectively disclosed SD-JWT authorization credentials to a `did:web`
//! broker over a channel keyed by ECDH-ES followed by ECDH-1PU. The broker
//! checks the credential against a trusted issuer list and a revocation
//! registry, then enforces the disclosed publish/subscribe topic grants.
//!
//! * [`crypto`]: keys, agreements, KDF, AEAD, nonces
//! * [`did`]: `did:key` codec, DID documents, resolution
//! * [`credential`]: SD-JWT issuance, presentation and verification
//! * [`protocol`]: packets, wire framing and the handshake state machines

pub mod credential;
pub mod crypto;
pub mod did;
pub mod protocol;

mod fsutil;

pub use fsutil::write_atomic;
