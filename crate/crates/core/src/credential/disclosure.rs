use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use rand::RngCore;
use sha2::{Digest, Sha256};

use super::{AuthorizationClaim, ClaimTopics, CredentialError};
use crate::did::Did;

const SALT_LEN: usize = 16;

/// A `[salt, key, value]` triple. Keeps the exact serialized JSON it was
/// built from or parsed from, since the digest covers those bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disclosure {
    salt: String,
    key: String,
    value: ClaimTopics,
    serialized: String,
}

impl Disclosure {
    /// Canonical form: compact JSON array, no whitespace.
    pub fn new(salt: impl Into<String>, key: impl Into<String>, value: ClaimTopics) -> Self {
        let (salt, key) = (salt.into(), key.into());
        let serialized =
            serde_json::to_string(&(&salt, &key, &value)).expect("disclosure serializes");
        Self {
            salt,
            key,
            value,
            serialized,
        }
    }

    pub fn for_claim(claim: &AuthorizationClaim) -> Self {
        let mut salt = [0u8; SALT_LEN];
        rand::thread_rng().fill_bytes(&mut salt);
        Self::new(
            URL_SAFE_NO_PAD.encode(salt),
            claim.broker.to_string(),
            claim.topics.clone(),
        )
    }

    pub fn parse(serialized: &str) -> Result<Self, CredentialError> {
        let (salt, key, value): (String, String, ClaimTopics) = serde_json::from_str(serialized)
            .map_err(|e| CredentialError::Malformed(format!("disclosure: {e}")))?;
        Ok(Self {
            salt,
            key,
            value,
            serialized: serialized.to_string(),
        })
    }

    /// base64url of the serialized JSON, as carried between `~` separators.
    pub fn encoded(&self) -> String {
        URL_SAFE_NO_PAD.encode(&self.serialized)
    }

    pub fn from_encoded(encoded: &str) -> Result<Self, CredentialError> {
        let raw = URL_SAFE_NO_PAD
            .decode(encoded)
            .map_err(|_| CredentialError::Malformed("disclosure is not base64url".into()))?;
        let text = String::from_utf8(raw)
            .map_err(|_| CredentialError::Malformed("disclosure is not UTF-8".into()))?;
        Self::parse(&text)
    }

    pub fn salt(&self) -> &str {
        &self.salt
    }

    /// Claim key: the broker DID string.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn value(&self) -> &ClaimTopics {
        &self.value
    }

    pub fn serialized(&self) -> &str {
        &self.serialized
    }

    pub fn is_for(&self, broker: &Did) -> bool {
        self.key == broker.to_string()
    }
}

/// base64url(SHA-256(serialized disclosure)).
pub fn hash_disclosure(d: &Disclosure) -> String {
    URL_SAFE_NO_PAD.encode(Sha256::digest(d.serialized.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_topics() -> ClaimTopics {
        ClaimTopics {
            subscribe: vec!["t1".into()],
            publish: vec!["t2".into()],
        }
    }

    #[test]
    fn fixed_digest() {
        // SHA-256 + base64url computed by tests/oracles/reference_vectors.py.
        let d = Disclosure::new(
            "2GLC42sKQveCfGfryNRN9w",
            "did:web:broker1.com",
            sample_topics(),
        );
        assert_eq!(
            d.serialized(),
            r#"["2GLC42sKQveCfGfryNRN9w","did:web:broker1.com",{"sub":["t1"],"pub":["t2"]}]"#
        );
        assert_eq!(
            hash_disclosure(&d),
            "gzeP7HGRxonHlR1sUkn_a7bHOSQHuLVeRdWNdFMhRVw"
        );
        assert_eq!(hash_disclosure(&d), hash_disclosure(&d));
    }

    #[test]
    fn salt_change_changes_digest() {
        let a = Disclosure::new(
            "2GLC42sKQveCfGfryNRN9w",
            "did:web:broker1.com",
            sample_topics(),
        );
        let b = Disclosure::new(
            "3GLC42sKQveCfGfryNRN9w",
            "did:web:broker1.com",
            sample_topics(),
        );
        assert_ne!(hash_disclosure(&a), hash_disclosure(&b));
    }

    #[test]
    fn digest_covers_received_bytes() {
        // Same content, different whitespace: parsing keeps the original bytes.
        let spaced = r#"["s", "did:web:b.com", {"pub": ["t"]}]"#;
        let parsed = Disclosure::parse(spaced).unwrap();
        let canonical = Disclosure::new("s", "did:web:b.com", parsed.value().clone());
        assert_eq!(parsed.serialized(), spaced);
        assert_ne!(hash_disclosure(&parsed), hash_disclosure(&canonical));
    }

    #[test]
    fn encoded_roundtrip() {
        let d = Disclosure::for_claim(&AuthorizationClaim::new(
            Did::web("b.com").unwrap(),
            ["x"],
            ["y"],
        ));
        assert_eq!(d.salt().len(), 22);
        assert_eq!(Disclosure::from_encoded(&d.encoded()).unwrap(), d);
        assert!(Disclosure::from_encoded("!!!").is_err());
        assert!(Disclosure::parse(r#"["s","k"]"#).is_err());
        assert!(Disclosure::parse(r#"["s","k",{"pub":["t"],"extra":1}]"#).is_err());
    }
}
