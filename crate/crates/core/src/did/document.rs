use serde::{Deserialize, Serialize};

use super::{
    decode_multibase_key, didkey_decode, encode_multibase_key, Did, DidError, DidMethod,
    ED25519_MULTICODEC, X25519_MULTICODEC,
};
use crate::crypto::ed25519_public_to_x25519;

/// Resolved DID metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DidDocument {
    pub id: Did,
    /// Ed25519 key for signature verification.
    pub verification_key: [u8; 32],
    /// X25519 key for key agreement.
    pub agreement_key: [u8; 32],
    pub service_endpoint: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct DocumentJson {
    id: String,
    #[serde(rename = "verificationMethod")]
    verification_method: String,
    #[serde(rename = "keyAgreement")]
    key_agreement: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    service: Vec<ServiceJson>,
}

#[derive(Serialize, Deserialize)]
struct ServiceJson {
    #[serde(rename = "type", default)]
    kind: String,
    #[serde(rename = "serviceEndpoint")]
    service_endpoint: String,
}

impl DidDocument {
    /// Document implied by a `did:key`: the agreement key is the Montgomery
    /// form of the embedded Ed25519 key.
    pub fn for_did_key(did: &Did) -> Result<Self, DidError> {
        let verification_key = didkey_decode(did)?;
        let agreement_key =
            ed25519_public_to_x25519(&verification_key).map_err(|_| DidError::InvalidKey)?;
        Ok(Self {
            id: did.clone(),
            verification_key,
            agreement_key,
            service_endpoint: None,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = DocumentJson {
            id: self.id.to_string(),
            verification_method: encode_multibase_key(ED25519_MULTICODEC, &self.verification_key),
            key_agreement: encode_multibase_key(X25519_MULTICODEC, &self.agreement_key),
            service: self
                .service_endpoint
                .iter()
                .map(|ep| ServiceJson {
                    kind: "DAXiotBroker".into(),
                    service_endpoint: ep.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("document serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, DidError> {
        let doc: DocumentJson = serde_json::from_slice(bytes)
            .map_err(|e| DidError::MalformedDocument(e.to_string()))?;
        let id: Did = doc
            .id
            .parse()
            .map_err(|e: DidError| DidError::MalformedDocument(e.to_string()))?;
        let bad = |e: DidError| DidError::MalformedDocument(e.to_string());
        let verification_key =
            decode_multibase_key(ED25519_MULTICODEC, &doc.verification_method).map_err(bad)?;
        let agreement_key =
            decode_multibase_key(X25519_MULTICODEC, &doc.key_agreement).map_err(bad)?;
        if id.method() == DidMethod::Key
            && Self::for_did_key(&id)?.verification_key != verification_key
        {
            return Err(DidError::MalformedDocument(
                "did:key document key does not match its id".into(),
            ));
        }
        Ok(Self {
            id,
            verification_key,
            agreement_key,
            service_endpoint: doc.service.into_iter().next().map(|s| s.service_endpoint),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{generate_signing_keypair, to_agreement_keypair};
    use crate::did::didkey_encode;

    #[test]
    fn did_key_document_matches_conversion() {
        let kp = generate_signing_keypair(None).unwrap();
        let doc = DidDocument::for_did_key(&didkey_encode(&kp.public()).unwrap()).unwrap();
        assert_eq!(doc.verification_key, kp.public());
        assert_eq!(doc.agreement_key, to_agreement_keypair(&kp).public());
        assert_eq!(doc.service_endpoint, None);
    }

    #[test]
    fn json_roundtrip_and_field_names() {
        let kp = generate_signing_keypair(Some(&[0; 32])).unwrap();
        let doc = DidDocument {
            id: Did::web("broker1.com").unwrap(),
            verification_key: kp.public(),
            agreement_key: to_agreement_keypair(&kp).public(),
            service_endpoint: Some("tcp://127.0.0.1:1883".into()),
        };
        let json = doc.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["id"], "did:web:broker1.com");
        assert_eq!(
            value["keyAgreement"],
            "z6LShs9GGnqk85isEBzzshkuVWrVKsRp24GnDuHk8QWkARMW"
        );
        assert_eq!(
            value["service"][0]["serviceEndpoint"],
            "tcp://127.0.0.1:1883"
        );
        assert!(value["verificationMethod"]
            .as_str()
            .unwrap()
            .starts_with("z6Mk"));
        assert_eq!(DidDocument::from_json(json.as_bytes()).unwrap(), doc);
    }

    #[test]
    fn malformed_documents() {
        assert!(DidDocument::from_json(b"{}").is_err());
        assert!(DidDocument::from_json(b"not json").is_err());
        let missing_agreement = r#"{"id":"did:web:a.com","verificationMethod":"z6MkiTBz1ymuepAQ4HEHYSF1H8quG5GLVVQR3djdX3mDooWp"}"#;
        assert!(matches!(
            DidDocument::from_json(missing_agreement.as_bytes()),
            Err(DidError::MalformedDocument(_))
        ));
    }
}
