use std::fmt;

use hkdf::Hkdf;
use sha2::Sha256;
use subtle::ConstantTimeEq;
use x25519_dalek::PublicKey as XPublic;
use zeroize::{Zeroize, ZeroizeOnDrop, Zeroizing};

use super::{AgreementKeyPair, CryptoError};

pub const CONTEXT_ES: &[u8] = b"DAXiot-ES";
pub const CONTEXT_1PU: &[u8] = b"DAXiot-1PU";

/// Builds the HKDF info string `label || sender || receiver`.
pub fn kdf_info(label: &[u8], sender: &str, receiver: &str) -> Vec<u8> {
    let mut info = Vec::with_capacity(label.len() + sender.len() + receiver.len());
    info.extend_from_slice(label);
    info.extend_from_slice(sender.as_bytes());
    info.extend_from_slice(receiver.as_bytes());
    info
}

/// Raw pre-KDF agreement output: 32 bytes (ES) or `Ze || Zs` (1PU).
pub struct SharedSecret(Zeroizing<Vec<u8>>);

impl SharedSecret {
    pub fn new(bytes: &[u8]) -> Result<Self, CryptoError> {
        match bytes.len() {
            32 | 64 => Ok(Self(Zeroizing::new(bytes.to_vec()))),
            n => Err(CryptoError::InvalidLength {
                what: "shared secret",
                expected: if n < 32 { 32 } else { 64 },
                actual: n,
            }),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Es,
    OnePu,
}

/// 32-byte AEAD key. Only constructed by the agreement functions below.
#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct SessionKey {
    key: [u8; 32],
    #[zeroize(skip)]
    kind: KeyKind,
}

impl SessionKey {
    pub fn kind(&self) -> KeyKind {
        self.kind
    }

    /// Raw key bytes. Exposed for test vectors and interop checks.
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.key
    }

    /// Wraps externally supplied key bytes; only for published AEAD vectors.
    #[cfg(any(test, feature = "raw-keys"))]
    pub fn from_raw(key: [u8; 32], kind: KeyKind) -> Self {
        Self { key, kind }
    }
}

impl PartialEq for SessionKey {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && bool::from(self.key.ct_eq(&other.key))
    }
}

impl Eq for SessionKey {}

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionKey")
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

/// HKDF-SHA-256 with an empty salt, 32-byte output.
pub fn kdf(secret: &SharedSecret, context: &[u8]) -> Result<[u8; 32], CryptoError> {
    if context.is_empty() {
        return Err(CryptoError::EmptyContext);
    }
    let mut okm = [0u8; 32];
    hkdf_sha256(&[], secret.as_bytes(), context, &mut okm)?;
    Ok(okm)
}

/// Plain HKDF-SHA-256 (extract then expand) filling `okm`.
pub fn hkdf_sha256(
    salt: &[u8],
    ikm: &[u8],
    info: &[u8],
    okm: &mut [u8],
) -> Result<(), CryptoError> {
    Hkdf::<Sha256>::new(Some(salt), ikm)
        .expand(info, okm)
        .map_err(|_| CryptoError::InvalidLength {
            what: "HKDF output",
            expected: 255 * 32,
            actual: okm.len(),
        })
}

/// Raw X25519 shared secret. Rejects low-order peer points, whose output
/// would not depend on our secret.
pub fn x25519(
    own: &AgreementKeyPair,
    peer_public: &[u8; 32],
) -> Result<Zeroizing<[u8; 32]>, CryptoError> {
    dh(own, peer_public)
}

fn dh(own: &AgreementKeyPair, peer_public: &[u8; 32]) -> Result<Zeroizing<[u8; 32]>, CryptoError> {
    let shared = own
        .static_secret()
        .diffie_hellman(&XPublic::from(*peer_public));
    if !shared.was_contributory() {
        return Err(CryptoError::LowOrderPoint);
    }
    Ok(Zeroizing::new(shared.to_bytes()))
}

fn derive(material: &[u8], context: &[u8], kind: KeyKind) -> Result<SessionKey, CryptoError> {
    let key = kdf(&SharedSecret::new(material)?, context)?;
    Ok(SessionKey { key, kind })
}

/// ECDH-ES. The sender passes its ephemeral pair and the receiver's static
/// public key; the receiver passes its static pair and the sender's ephemeral
/// public key. Both obtain the same key for the same context.
pub fn ecdh_es(
    own: &AgreementKeyPair,
    peer_public: &[u8; 32],
    context: &[u8],
) -> Result<SessionKey, CryptoError> {
    let z = dh(own, peer_public)?;
    derive(&z[..], context, KeyKind::Es)
}

/// ECDH-1PU, sender side: `Ze = DH(eph, recv)`, `Zs = DH(static, recv)`.
pub fn ecdh_1pu_sender(
    sender_static: &AgreementKeyPair,
    sender_ephemeral: &AgreementKeyPair,
    receiver_static_public: &[u8; 32],
    context: &[u8],
) -> Result<SessionKey, CryptoError> {
    let ze = dh(sender_ephemeral, receiver_static_public)?;
    let zs = dh(sender_static, receiver_static_public)?;
    derive(&concat(&ze, &zs)[..], context, KeyKind::OnePu)
}

/// ECDH-1PU, receiver side: `Ze = DH(recv, eph)`, `Zs = DH(recv, static)`.
pub fn ecdh_1pu_receiver(
    receiver_static: &AgreementKeyPair,
    sender_ephemeral_public: &[u8; 32],
    sender_static_public: &[u8; 32],
    context: &[u8],
) -> Result<SessionKey, CryptoError> {
    let ze = dh(receiver_static, sender_ephemeral_public)?;
    let zs = dh(receiver_static, sender_static_public)?;
    derive(&concat(&ze, &zs)[..], context, KeyKind::OnePu)
}

fn concat(ze: &[u8; 32], zs: &[u8; 32]) -> Zeroizing<[u8; 64]> {
    let mut out = Zeroizing::new([0u8; 64]);
    out[..32].copy_from_slice(ze);
    out[32..].copy_from_slice(zs);
    out
}
