use std::fmt;
use std::io;
use std::path::Path;

use ed25519_dalek::{Signer, Verifier};
use rand::rngs::OsRng;
use x25519_dalek::{PublicKey as XPublic, StaticSecret};

use super::{fixed, CryptoError};

pub const SIGNATURE_LEN: usize = 64;

/// Ed25519 identity key pair. `secret` is the 32-byte seed.
#[derive(Clone)]
pub struct SigningKeyPair {
    inner: ed25519_dalek::SigningKey,
}

impl SigningKeyPair {
    pub fn from_seed(seed: &[u8; 32]) -> Self {
        Self {
            inner: ed25519_dalek::SigningKey::from_bytes(seed),
        }
    }

    pub fn seed(&self) -> [u8; 32] {
        self.inner.to_bytes()
    }

    pub fn public(&self) -> [u8; 32] {
        self.inner.verifying_key().to_bytes()
    }

    /// Reads a seed file: 64 hex characters, surrounding whitespace ignored.
    pub fn read_seed_file(path: impl AsRef<Path>) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let bytes = decode_hex(text.trim())
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "seed file is not hex"))?;
        let seed: [u8; 32] = fixed("seed", &bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        Ok(Self::from_seed(&seed))
    }

    pub fn write_seed_file(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let hex: String = self.seed().iter().map(|b| format!("{b:02x}")).collect();
        crate::fsutil::write_atomic(path.as_ref(), format!("{hex}\n").as_bytes())
    }
}

impl fmt::Debug for SigningKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningKeyPair")
            .field("public", &Hex(&self.public()))
            .finish_non_exhaustive()
    }
}

/// X25519 key pair derived from a [`SigningKeyPair`].
#[derive(Clone)]
pub struct AgreementKeyPair {
    secret: StaticSecret,
    public: [u8; 32],
}

impl AgreementKeyPair {
    /// Clamped X25519 scalar.
    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes()
    }

    pub fn public(&self) -> [u8; 32] {
        self.public
    }

    pub(crate) fn static_secret(&self) -> &StaticSecret {
        &self.secret
    }

    /// Wraps a raw X25519 scalar. Only used for fixed test vectors; protocol
    /// code always goes through [`to_agreement_keypair`].
    pub fn from_scalar(scalar: [u8; 32]) -> Self {
        let secret = StaticSecret::from(scalar);
        let public = XPublic::from(&secret).to_bytes();
        Self { secret, public }
    }
}

impl fmt::Debug for AgreementKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgreementKeyPair")
            .field("public", &Hex(&self.public))
            .finish_non_exhaustive()
    }
}

/// Generates an Ed25519 pair, from `seed` when given (tests) or the OS RNG.
pub fn generate_signing_keypair(seed: Option<&[u8]>) -> Result<SigningKeyPair, CryptoError> {
    match seed {
        Some(seed) => Ok(SigningKeyPair::from_seed(&fixed("seed", seed)?)),
        None => Ok(SigningKeyPair {
            inner: ed25519_dalek::SigningKey::generate(&mut OsRng),
        }),
    }
}

/// Maps the Ed25519 pair onto Montgomery form.
///
/// The secret scalar is the clamped lower half of SHA-512(seed), the same
/// scalar Ed25519 signs with; the public key is the Montgomery `u` of the
/// Edwards point, `u = (1 + y) / (1 - y)`.
pub fn to_agreement_keypair(kp: &SigningKeyPair) -> AgreementKeyPair {
    let secret = StaticSecret::from(clamp(kp.inner.to_scalar_bytes()));
    let public = kp.inner.verifying_key().to_montgomery().to_bytes();
    AgreementKeyPair { secret, public }
}

/// Converts a bare Ed25519 public key (e.g. decoded from a did:key).
pub fn ed25519_public_to_x25519(public: &[u8; 32]) -> Result<[u8; 32], CryptoError> {
    let vk = ed25519_dalek::VerifyingKey::from_bytes(public)
        .map_err(|_| CryptoError::InvalidPublicKey)?;
    Ok(vk.to_montgomery().to_bytes())
}

pub fn sign(kp: &SigningKeyPair, message: &[u8]) -> [u8; SIGNATURE_LEN] {
    kp.inner.sign(message).to_bytes()
}

pub fn verify(public: &[u8; 32], message: &[u8], signature: &[u8]) -> Result<(), CryptoError> {
    let sig: [u8; SIGNATURE_LEN] = fixed("signature", signature)?;
    let vk = ed25519_dalek::VerifyingKey::from_bytes(public)
        .map_err(|_| CryptoError::InvalidPublicKey)?;
    vk.verify(message, &ed25519_dalek::Signature::from_bytes(&sig))
        .map_err(|_| CryptoError::BadSignature)
}

fn clamp(mut scalar: [u8; 32]) -> [u8; 32] {
    scalar[0] &= 248;
    scalar[31] &= 127;
    scalar[31] |= 64;
    scalar
}

fn decode_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

struct Hex<'a>(&'a [u8]);

impl fmt::Debug for Hex<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}
