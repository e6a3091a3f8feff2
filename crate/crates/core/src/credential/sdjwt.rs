use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{hash_disclosure, AuthorizationClaim, CredentialError, Disclosure};
use crate::crypto::{self, SigningKeyPair, SIGNATURE_LEN};
use crate::did::Did;

pub const CREDENTIAL_TYPE: &str = "AuthorizationCredential";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct JwtHeader {
    alg: String,
    typ: String,
}

impl Default for JwtHeader {
    fn default() -> Self {
        Self {
            alg: "EdDSA".into(),
            typ: "sd+jwt".into(),
        }
    }
}

/// JWT claims: identities, credential id and the disclosure digests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialPayload {
    pub iss: Did,
    pub sub: Did,
    #[serde(rename = "type")]
    pub kind: String,
    pub jti: String,
    #[serde(rename = "_sd")]
    pub sd: Vec<String>,
}

/// A signed SD-JWT. The compact `header.payload.signature` text is retained
/// verbatim; the signature covers its first two segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdJwtCredential {
    payload: CredentialPayload,
    signature: [u8; SIGNATURE_LEN],
    compact: String,
}

impl SdJwtCredential {
    pub fn payload(&self) -> &CredentialPayload {
        &self.payload
    }

    pub fn compact(&self) -> &str {
        &self.compact
    }

    /// Splits and decodes a compact JWT. Does not check the signature.
    pub fn parse(compact: &str) -> Result<Self, CredentialError> {
        let malformed = |m: &str| CredentialError::Malformed(m.to_string());
        let mut parts = compact.split('.');
        let (Some(h), Some(p), Some(s), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(malformed("JWT must have three segments"));
        };
        let header: JwtHeader = decode_json(h).ok_or_else(|| malformed("header"))?;
        if header != JwtHeader::default() {
            return Err(malformed("unsupported JWT header"));
        }
        let payload: CredentialPayload = decode_json(p).ok_or_else(|| malformed("payload"))?;
        if payload.kind != CREDENTIAL_TYPE {
            return Err(malformed("not an AuthorizationCredential"));
        }
        let sig = URL_SAFE_NO_PAD
            .decode(s)
            .map_err(|_| malformed("signature encoding"))?;
        let signature = sig.try_into().map_err(|_| malformed("signature length"))?;
        Ok(Self {
            payload,
            signature,
            compact: compact.to_string(),
        })
    }

    pub fn verify_signature(&self, issuer_key: &[u8; 32]) -> Result<(), CredentialError> {
        let signing_input = self
            .compact
            .rsplit_once('.')
            .map(|(input, _)| input)
            .ok_or(CredentialError::BadSignature)?;
        crypto::verify(issuer_key, signing_input.as_bytes(), &self.signature)
            .map_err(|_| CredentialError::BadSignature)
    }
}

fn decode_json<T: serde::de::DeserializeOwned>(segment: &str) -> Option<T> {
    let raw = URL_SAFE_NO_PAD.decode(segment).ok()?;
    serde_json::from_slice(&raw).ok()
}

/// Issues a credential with one salted disclosure per claim. The payload
/// carries only the digests.
pub fn issue(
    issuer_kp: &SigningKeyPair,
    issuer_did: &Did,
    subject_did: &Did,
    claims: &[AuthorizationClaim],
    jti: &str,
) -> Result<(SdJwtCredential, Vec<Disclosure>), CredentialError> {
    if claims.is_empty() {
        return Err(CredentialError::EmptyClaims);
    }
    for claim in claims {
        claim.topics.validate()?;
    }
    if issuer_did == subject_did {
        log::warn!("issuing self-signed credential {jti} ({issuer_did} is its own subject)");
    }
    let disclosures: Vec<Disclosure> = claims.iter().map(Disclosure::for_claim).collect();
    let payload = CredentialPayload {
        iss: issuer_did.clone(),
        sub: subject_did.clone(),
        kind: CREDENTIAL_TYPE.into(),
        jti: jti.to_string(),
        sd: disclosures.iter().map(hash_disclosure).collect(),
    };
    let header = serde_json::to_vec(&JwtHeader::default()).expect("header serializes");
    let body = serde_json::to_vec(&payload).expect("payload serializes");
    let signing_input = format!(
        "{}.{}",
        URL_SAFE_NO_PAD.encode(header),
        URL_SAFE_NO_PAD.encode(body)
    );
    let signature = crypto::sign(issuer_kp, signing_input.as_bytes());
    let compact = format!("{signing_input}.{}", URL_SAFE_NO_PAD.encode(signature));
    Ok((
        SdJwtCredential {
            payload,
            signature,
            compact,
        },
        disclosures,
    ))
}
