//! File-level operations behind the operator commands.
//!
//! Secrets only ever come from files; every write is an atomic replace.

use std::path::{Path, PathBuf};

use daxiot_core::credential::{
    issue, AuthorizationClaim, Disclosure, RevocationRegistry, SdJwtCredential, TrustedIssuerList,
};
use daxiot_core::crypto::{generate_signing_keypair, to_agreement_keypair, SigningKeyPair};
use daxiot_core::did::{didkey_encode, Did, DidDocument, DirectorySource, ResolverRegistry};

use crate::error::{at, CliError};

pub const CREDENTIAL_FILE: &str = "credential.sdjwt";

pub fn read_key(path: &Path) -> Result<SigningKeyPair, CliError> {
    SigningKeyPair::read_seed_file(path).map_err(at(path))
}

/// Writes a fresh seed file and returns the matching `did:key`.
pub fn keygen(out: &Path) -> Result<Did, CliError> {
    if out.exists() {
        return Err(CliError::Usage(format!("{} already exists", out.display())));
    }
    let kp = generate_signing_keypair(None)?;
    kp.write_seed_file(out).map_err(at(out))?;
    Ok(didkey_encode(&kp.public())?)
}

pub fn did_show(key: &Path) -> Result<Did, CliError> {
    Ok(didkey_encode(&read_key(key)?.public())?)
}

/// Writes the `did:web` document for `key` into a document directory.
pub fn didweb_emit(key: &Path, did: &Did, dir: &Path, endpoint: Option<&str>) -> Result<PathBuf, CliError> {
    let kp = read_key(key)?;
    let doc = DidDocument {
        id: did.clone(),
        verification_key: kp.public(),
        agreement_key: to_agreement_keypair(&kp).public(),
        service_endpoint: endpoint.map(str::to_string),
    };
    DirectorySource::new(dir).store(&doc).map_err(at(dir))
}

#[derive(Debug)]
pub struct Issued {
    pub credential: PathBuf,
    pub disclosures: Vec<PathBuf>,
}

/// Issues a credential and writes it plus one file per disclosure.
pub fn issue_files(
    key: &Path,
    issuer: &Did,
    subject: &Did,
    claims: &Path,
    jti: &str,
    out_dir: &Path,
) -> Result<Issued, CliError> {
    let kp = read_key(key)?;
    let claims = AuthorizationClaim::list_from_json(&std::fs::read(claims).map_err(at(claims))?)?;
    let (credential, disclosures) = issue(&kp, issuer, subject, &claims, jti)?;
    write_credential(out_dir, &credential, &disclosures)
}

pub fn write_credential(
    out_dir: &Path,
    credential: &SdJwtCredential,
    disclosures: &[Disclosure],
) -> Result<Issued, CliError> {
    std::fs::create_dir_all(out_dir).map_err(at(out_dir))?;
    let cred_path = out_dir.join(CREDENTIAL_FILE);
    daxiot_core::write_atomic(&cred_path, format!("{}\n", credential.compact()).as_bytes()).map_err(at(&cred_path))?;
    let mut paths = Vec::new();
    for (i, d) in disclosures.iter().enumerate() {
        let p = out_dir.join(format!("disclosure-{}.txt", i + 1));
        daxiot_core::write_atomic(&p, format!("{}\n", d.encoded()).as_bytes()).map_err(at(&p))?;
        paths.push(p);
    }
    Ok(Issued {
        credential: cred_path,
        disclosures: paths,
    })
}

/// Reads a directory written by [`issue_files`].
pub fn load_credential(dir: &Path) -> Result<(SdJwtCredential, Vec<Disclosure>), CliError> {
    let cred_path = dir.join(CREDENTIAL_FILE);
    let text = std::fs::read_to_string(&cred_path).map_err(at(&cred_path))?;
    let credential = SdJwtCredential::parse(text.trim())?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(at(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("disclosure-") && n.ends_with(".txt"))
        })
        .collect();
    files.sort();
    let mut disclosures = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(at(&f))?;
        disclosures.push(Disclosure::from_encoded(text.trim())?);
    }
    Ok((credential, disclosures))
}

/// Marks `jti` revoked. Creates the registry file when absent.
pub fn revoke(rr: &Path, jti: &str) -> Result<(), CliError> {
    let mut reg = RevocationRegistry::load_or_default(rr)?;
    reg.revoke(jti);
    reg.save(rr)?;
    Ok(())
}

fn load_til(til: &Path) -> Result<TrustedIssuerList, CliError> {
    if til.exists() {
        Ok(TrustedIssuerList::load(til)?)
    } else {
        Ok(TrustedIssuerList::new())
    }
}

/// Adds an issuer; returns false if it was already listed.
pub fn til_add(til: &Path, did: &Did) -> Result<bool, CliError> {
    let mut list = load_til(til)?;
    let added = list.add(did.clone());
    list.save(til)?;
    Ok(added)
}

/// Removes an issuer; returns false if it was not listed.
pub fn til_remove(til: &Path, did: &Did) -> Result<bool, CliError> {
    let mut list = load_til(til)?;
    let removed = list.remove(did);
    list.save(til)?;
    Ok(removed)
}

/// TCP address of a broker: explicit, or from its document's
/// `tcp://host:port` service endpoint.
pub fn broker_address(registry: &ResolverRegistry, broker: &Did, explicit: Option<&str>) -> Result<String, CliError> {
    if let Some(a) = explicit {
        return Ok(a.to_string());
    }
    let doc = registry.resolve(broker)?;
    let endpoint = doc
        .service_endpoint
        .ok_or_else(|| CliError::Usage(format!("{broker} publishes no service endpoint; pass --address")))?;
    Ok(endpoint.strip_prefix("tcp://").unwrap_or(&endpoint).to_string())
}
