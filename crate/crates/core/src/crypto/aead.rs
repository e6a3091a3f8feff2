use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{XChaCha20Poly1305, XNonce};

use super::{CryptoError, Nonce, SessionKey, NONCE_LEN};

pub const TAG_LEN: usize = 16;

/// `nonce || ciphertext || tag` on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AeadEnvelope {
    pub nonce: Nonce,
    pub ciphertext: Vec<u8>,
}

impl AeadEnvelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(NONCE_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.nonce.to_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < NONCE_LEN + TAG_LEN {
            return Err(CryptoError::InvalidLength {
                what: "aead envelope",
                expected: NONCE_LEN + TAG_LEN,
                actual: bytes.len(),
            });
        }
        Ok(Self {
            nonce: Nonce::from_bytes(&bytes[..NONCE_LEN])?,
            ciphertext: bytes[NONCE_LEN..].to_vec(),
        })
    }
}

pub fn aead_encrypt(key: &SessionKey, nonce: Nonce, plaintext: &[u8], aad: &[u8]) -> AeadEnvelope {
    let cipher = XChaCha20Poly1305::new(key.as_bytes().into());
    let ciphertext = cipher
        .encrypt(
            XNonce::from_slice(&nonce.to_bytes()),
            Payload {
                msg: plaintext,
                aad,
            },
        )
        .expect("XChaCha20-Poly1305 encryption cannot fail for in-memory buffers");
    AeadEnvelope { nonce, ciphertext }
}

pub fn aead_decrypt(
    key: &SessionKey,
    envelope: &AeadEnvelope,
    aad: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let cipher = XChaCha20Poly1305::new(key.as_bytes().into());
    cipher
        .decrypt(
            XNonce::from_slice(&envelope.nonce.to_bytes()),
            Payload {
                msg: &envelope.ciphertext,
                aad,
            },
        )
        .map_err(|_| CryptoError::IntegrityViolation)
}
