//! Cryptographic primitives shared by every actor.
//!
//! Identity keys are Ed25519. Each identity key pair is converted into an
//! X25519 key pair through the birational map between the Edwards and
//! Montgomery forms of Curve25519, so one seed serves both signing and key
//! agreement.
//!
//! Session keys come out of two agreement modes:
//!
//! * ECDH-ES: an ephemeral sender key against the receiver's static key.
//!   The sender stays anonymous and only the receiver is authenticated.
//! * ECDH-1PU: the ES agreement plus a static-static agreement. The KDF input
//!   is `Ze || Zs`, which authenticates both parties.
//!
//! Both modes feed HKDF-SHA-256, and all payload encryption is
//! XChaCha20-Poly1305 with a structured 24-byte nonce (16-byte prefix and
//! 64-bit big-endian counter).

mod aead;
mod agreement;
mod keys;
mod nonce;

pub use aead::{aead_decrypt, aead_encrypt, AeadEnvelope, TAG_LEN};
pub use agreement::{
    ecdh_1pu_receiver, ecdh_1pu_sender, ecdh_es, hkdf_sha256, kdf, kdf_info, x25519, KeyKind,
    SessionKey, SharedSecret, CONTEXT_1PU, CONTEXT_ES,
};
pub use keys::{
    ed25519_public_to_x25519, generate_signing_keypair, sign, to_agreement_keypair, verify,
    AgreementKeyPair, SigningKeyPair, SIGNATURE_LEN,
};
pub use nonce::{Nonce, NONCE_LEN, NONCE_PREFIX_LEN};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid length for {what}: expected {expected}, got {actual}")]
    InvalidLength {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid public key")]
    InvalidPublicKey,
    #[error("low-order point: key agreement produced an all-zero secret")]
    LowOrderPoint,
    #[error("key derivation context must not be empty")]
    EmptyContext,
    #[error("integrity violation: authentication tag mismatch")]
    IntegrityViolation,
    #[error("nonce counter exhausted")]
    NonceOverflow,
    #[error("signature rejected")]
    BadSignature,
    #[error("malformed key file: {0}")]
    KeyFile(String),
}

pub(crate) fn fixed<const N: usize>(
    what: &'static str,
    bytes: &[u8],
) -> Result<[u8; N], CryptoError> {
    bytes.try_into().map_err(|_| CryptoError::InvalidLength {
        what,
        expected: N,
        actual: bytes.len(),
    })
}
