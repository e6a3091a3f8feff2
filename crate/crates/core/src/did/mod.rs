//! Decentralized identifiers.
//!
//! Two methods are supported. `did:key` embeds the Ed25519 public key in the
//! identifier (multibase base58btc, multicodec `0xed 0x01`), so its document
//! is computed locally. `did:web` documents are fetched through a
//! [`WebSource`], either a directory of JSON files or an HTTP fetcher.

mod document;
mod resolver;

pub use document::DidDocument;
#[cfg(feature = "http")]
pub use resolver::HttpSource;
pub use resolver::{DirectorySource, MemorySource, ResolverRegistry, WebSource};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const ED25519_MULTICODEC: [u8; 2] = [0xed, 0x01];
pub const X25519_MULTICODEC: [u8; 2] = [0xec, 0x01];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DidError {
    #[error("invalid DID syntax: {0}")]
    Syntax(String),
    #[error("unsupported DID method: {0}")]
    UnknownMethod(String),
    #[error("expected a did:key")]
    NotDidKey,
    #[error("multibase value must start with 'z' (base58btc)")]
    BadMultibasePrefix,
    #[error("invalid base58btc encoding")]
    BadBase58,
    #[error("unexpected multicodec prefix")]
    BadMulticodec,
    #[error("wrong key length: expected 32, got {0}")]
    WrongKeyLength(usize),
    #[error("key is not a valid curve point")]
    InvalidKey,
    #[error("no document found for {0}")]
    NotFound(String),
    #[error("malformed DID document: {0}")]
    MalformedDocument(String),
    #[error("document source error: {0}")]
    Source(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DidMethod {
    Key,
    Web,
}

impl DidMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            DidMethod::Key => "key",
            DidMethod::Web => "web",
        }
    }
}

/// A `did:key` or `did:web` identifier. Compared by canonical string form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Did {
    method: DidMethod,
    identifier: String,
}

impl Did {
    pub fn method(&self) -> DidMethod {
        self.method
    }

    pub fn identifier(&self) -> &str {
        &self.identifier
    }

    /// Shorthand for `did:web:<identifier>`.
    pub fn web(identifier: &str) -> Result<Self, DidError> {
        format!("did:web:{identifier}").parse()
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "did:{}:{}", self.method.as_str(), self.identifier)
    }
}

impl FromStr for Did {
    type Err = DidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s
            .strip_prefix("did:")
            .ok_or_else(|| DidError::Syntax(format!("missing 'did:' scheme in {s:?}")))?;
        let (method, identifier) = rest
            .split_once(':')
            .ok_or_else(|| DidError::Syntax(format!("missing method-specific id in {s:?}")))?;
        let method = match method {
            "key" => DidMethod::Key,
            "web" => DidMethod::Web,
            other => return Err(DidError::UnknownMethod(other.to_string())),
        };
        let valid_char =
            |c: char| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_' | '%' | ':');
        if identifier.is_empty()
            || identifier.starts_with(':')
            || identifier.ends_with(':')
            || !identifier.chars().all(valid_char)
        {
            return Err(DidError::Syntax(format!("invalid identifier in {s:?}")));
        }
        if method == DidMethod::Key && identifier.contains(':') {
            return Err(DidError::Syntax(format!(
                "did:key identifiers have no path: {s:?}"
            )));
        }
        Ok(Self {
            method,
            identifier: identifier.to_string(),
        })
    }
}

impl Serialize for Did {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Did {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `z` + base58btc(codec || key).
pub fn encode_multibase_key(codec: [u8; 2], key: &[u8; 32]) -> String {
    let mut buf = Vec::with_capacity(34);
    buf.extend_from_slice(&codec);
    buf.extend_from_slice(key);
    format!("z{}", bs58::encode(buf).into_string())
}

pub fn decode_multibase_key(codec: [u8; 2], value: &str) -> Result<[u8; 32], DidError> {
    let body = value
        .strip_prefix('z')
        .ok_or(DidError::BadMultibasePrefix)?;
    let raw = bs58::decode(body)
        .into_vec()
        .map_err(|_| DidError::BadBase58)?;
    let key = raw
        .strip_prefix(&codec[..])
        .ok_or(DidError::BadMulticodec)?;
    key.try_into()
        .map_err(|_| DidError::WrongKeyLength(key.len()))
}

/// Encodes an Ed25519 public key as `did:key:z6Mk…`.
pub fn didkey_encode(public_key: &[u8]) -> Result<Did, DidError> {
    let key: &[u8; 32] = public_key
        .try_into()
        .map_err(|_| DidError::WrongKeyLength(public_key.len()))?;
    Ok(Did {
        method: DidMethod::Key,
        identifier: encode_multibase_key(ED25519_MULTICODEC, key),
    })
}

pub fn didkey_decode(did: &Did) -> Result<[u8; 32], DidError> {
    if did.method != DidMethod::Key {
        return Err(DidError::NotDidKey);
    }
    decode_multibase_key(ED25519_MULTICODEC, &did.identifier)
}
