use super::{
    hash_disclosure, AuthorizationGrant, CredentialError, Disclosure, RevocationRegistry,
    RevocationStatus, SdJwtCredential, TrustedIssuerList,
};
use crate::did::{Did, ResolverRegistry};

/// A credential plus the subset of disclosures the holder chose to reveal.
/// Compact form: `<JWT>~<D1>~...~<Dn>~`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Presentation {
    pub credential: SdJwtCredential,
    pub disclosures: Vec<Disclosure>,
}

impl Presentation {
    pub fn to_compact(&self) -> String {
        let mut out = String::from(self.credential.compact());
        out.push('~');
        for d in &self.disclosures {
            out.push_str(&d.encoded());
            out.push('~');
        }
        out
    }

    pub fn parse(compact: &str) -> Result<Self, CredentialError> {
        let body = compact
            .strip_suffix('~')
            .ok_or_else(|| CredentialError::Malformed("presentation must end with '~'".into()))?;
        let mut parts = body.split('~');
        let jwt = parts.next().unwrap_or_default();
        let credential = SdJwtCredential::parse(jwt)?;
        let disclosures = parts
            .map(Disclosure::from_encoded)
            .collect::<Result<_, _>>()?;
        Ok(Self {
            credential,
            disclosures,
        })
    }
}

/// Keeps only the disclosures keyed on `selected_broker`.
pub fn present(
    credential: &SdJwtCredential,
    all_disclosures: &[Disclosure],
    selected_broker: &Did,
) -> Result<Presentation, CredentialError> {
    let disclosures: Vec<Disclosure> = all_disclosures
        .iter()
        .filter(|d| d.is_for(selected_broker))
        .cloned()
        .collect();
    if disclosures.is_empty() {
        return Err(CredentialError::NothingToPresent);
    }
    Ok(Presentation {
        credential: credential.clone(),
        disclosures,
    })
}

/// Runs the broker-side check sequence and returns the grant for `verifier`.
pub fn verify_presentation(
    presentation: &Presentation,
    expected_subject: &Did,
    verifier: &Did,
    til: &TrustedIssuerList,
    rr: &RevocationRegistry,
    registry: &ResolverRegistry,
) -> Result<AuthorizationGrant, CredentialError> {
    let cred = &presentation.credential;
    let payload = cred.payload();

    if &payload.sub != expected_subject {
        return Err(CredentialError::SubjectMismatch);
    }
    if !til.contains(&payload.iss) {
        return Err(CredentialError::UntrustedIssuer);
    }
    let issuer_doc = registry
        .resolve(&payload.iss)
        .map_err(CredentialError::IssuerResolution)?;
    cred.verify_signature(&issuer_doc.verification_key)?;
    if rr.status(&payload.jti) == RevocationStatus::Revoked {
        return Err(CredentialError::Revoked);
    }
    if presentation
        .disclosures
        .iter()
        .any(|d| !payload.sd.contains(&hash_disclosure(d)))
    {
        return Err(CredentialError::UnknownDisclosure);
    }

    let mut grant = AuthorizationGrant::default();
    for d in presentation
        .disclosures
        .iter()
        .filter(|d| d.is_for(verifier))
    {
        grant.absorb(d.value());
    }
    Ok(grant)
}
