use rand::RngCore;

use super::{fixed, CryptoError};

pub const NONCE_PREFIX_LEN: usize = 16;
pub const NONCE_LEN: usize = 24;

/// 24-byte AEAD nonce: random prefix followed by a big-endian counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nonce {
    pub prefix: [u8; NONCE_PREFIX_LEN],
    pub counter: u64,
}

impl Nonce {
    pub fn new(prefix: [u8; NONCE_PREFIX_LEN], counter: u64) -> Self {
        Self { prefix, counter }
    }

    /// Fresh random prefix, counter zero.
    pub fn random() -> Self {
        let mut prefix = [0u8; NONCE_PREFIX_LEN];
        rand::thread_rng().fill_bytes(&mut prefix);
        Self { prefix, counter: 0 }
    }

    /// Same prefix, counter + 1. Never wraps.
    pub fn next(&self) -> Result<Self, CryptoError> {
        let counter = self
            .counter
            .checked_add(1)
            .ok_or(CryptoError::NonceOverflow)?;
        Ok(Self {
            prefix: self.prefix,
            counter,
        })
    }

    pub fn to_bytes(&self) -> [u8; NONCE_LEN] {
        let mut out = [0u8; NONCE_LEN];
        out[..NONCE_PREFIX_LEN].copy_from_slice(&self.prefix);
        out[NONCE_PREFIX_LEN..].copy_from_slice(&self.counter.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let raw: [u8; NONCE_LEN] = fixed("nonce", bytes)?;
        let mut prefix = [0u8; NONCE_PREFIX_LEN];
        prefix.copy_from_slice(&raw[..NONCE_PREFIX_LEN]);
        let counter = u64::from_be_bytes(raw[NONCE_PREFIX_LEN..].try_into().expect("8 bytes"));
        Ok(Self { prefix, counter })
    }
}
