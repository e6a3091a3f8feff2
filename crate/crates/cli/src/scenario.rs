//! Self-contained deployments on disk: a broker with its key, document,
//! TIL, RR and config, plus issuers and devices. Used by `demo`, `bench` and
//! the acceptance suite.

use std::path::{Path, PathBuf};

use daxiot_broker::{Broker, BrokerConfig, ClientError, Connection, EventLog, LogLevel, StartError};
use daxiot_core::credential::{issue, AuthorizationClaim, Disclosure, RevocationRegistry, SdJwtCredential};
use daxiot_core::crypto::SigningKeyPair;
use daxiot_core::did::{didkey_encode, Did, ResolverRegistry};

use crate::commands;
use crate::error::{at, CliError};

pub const BROKER_DID: &str = "did:web:broker1.com";
pub const OTHER_BROKER_DID: &str = "did:web:broker2.com";

#[derive(Debug)]
pub struct Issuer {
    pub key: SigningKeyPair,
    pub did: Did,
}

#[derive(Debug)]
pub struct Device {
    pub name: String,
    pub key: SigningKeyPair,
    pub did: Did,
    pub jti: String,
    pub credential: SdJwtCredential,
    pub disclosures: Vec<Disclosure>,
}

/// Two-broker claims: one object for this broker and one for a second
/// broker the device also uses.
pub fn two_broker_claims(
    sub: &[&str],
    publ: &[&str],
    other_sub: &[&str],
    other_pub: &[&str],
) -> Vec<AuthorizationClaim> {
    let broker: Did = BROKER_DID.parse().expect("valid DID");
    let other: Did = OTHER_BROKER_DID.parse().expect("valid DID");
    vec![
        AuthorizationClaim::new(broker, sub.to_vec(), publ.to_vec()),
        AuthorizationClaim::new(other, other_sub.to_vec(), other_pub.to_vec()),
    ]
}

#[derive(Debug)]
pub struct Deployment {
    root: PathBuf,
    pub config: BrokerConfig,
    pub config_path: PathBuf,
    pub registry: ResolverRegistry,
    pub issuer: Issuer,
}

impl Deployment {
    /// Lays out a broker and one trusted issuer under `root`.
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(at(root))?;
        let docs = root.join("did-web");
        let broker_did: Did = BROKER_DID.parse()?;
        let key_path = root.join("broker.seed");
        commands::keygen(&key_path)?;
        commands::didweb_emit(&key_path, &broker_did, &docs, Some("tcp://127.0.0.1:1883"))?;
        let config = BrokerConfig {
            listen_address: "127.0.0.1:0".into(),
            broker_did,
            signing_key_path: key_path,
            til_path: root.join("til.json"),
            rr_path: root.join("rr.json"),
            did_web_dir: docs.clone(),
            log_level: LogLevel::Info,
        };
        RevocationRegistry::new().save(&config.rr_path)?;
        let issuer = new_issuer(root, &docs, "issuer.com")?;
        commands::til_add(&config.til_path, &issuer.did)?;
        let config_path = root.join("broker.json");
        config.save(&config_path).map_err(at(&config_path))?;
        Ok(Self {
            root: root.to_path_buf(),
            config_path,
            registry: ResolverRegistry::directory(&docs),
            issuer,
            config,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates an issuer key and publishes its `did:web` document. The
    /// issuer is not added to the TIL.
    pub fn add_issuer(&self, host: &str) -> Result<Issuer, CliError> {
        new_issuer(&self.root, &self.config.did_web_dir, host)
    }

    /// A device with a fresh key and a credential from `issuer`, written to
    /// `devices/<name>/`.
    pub fn device(
        &self,
        issuer: &Issuer,
        name: &str,
        jti: &str,
        claims: &[AuthorizationClaim],
    ) -> Result<Device, CliError> {
        let dir = self.root.join("devices").join(name);
        std::fs::create_dir_all(&dir).map_err(at(&dir))?;
        let key_path = dir.join("device.seed");
        let did = commands::keygen(&key_path)?;
        let key = commands::read_key(&key_path)?;
        let (credential, disclosures) = issue(&issuer.key, &issuer.did, &did, claims, jti)?;
        commands::write_credential(&dir, &credential, &disclosures)?;
        debug_assert_eq!(did, didkey_encode(&key.public())?);
        Ok(Device {
            name: name.into(),
            key,
            did,
            jti: jti.into(),
            credential,
            disclosures,
        })
    }

    pub fn start(&self, log: EventLog) -> Result<Broker, StartError> {
        Broker::from_config(&self.config, log)
    }

    pub fn broker_did(&self) -> &Did {
        &self.config.broker_did
    }

    pub fn connect<S: std::io::Read + std::io::Write>(
        &self,
        stream: S,
        device: &Device,
    ) -> Result<Connection<S>, ClientError> {
        Connection::establish(
            stream,
            &device.key,
            self.broker_did(),
            &self.registry,
            &device.credential,
            &device.disclosures,
        )
    }

    pub fn revoke(&self, jti: &str) -> Result<(), CliError> {
        commands::revoke(&self.config.rr_path, jti)
    }

    pub fn til_add(&self, did: &Did) -> Result<bool, CliError> {
        commands::til_add(&self.config.til_path, did)
    }

    pub fn til_remove(&self, did: &Did) -> Result<bool, CliError> {
        commands::til_remove(&self.config.til_path, did)
    }
}

fn new_issuer(root: &Path, docs: &Path, host: &str) -> Result<Issuer, CliError> {
    let key_path = root.join(format!("{host}.seed"));
    commands::keygen(&key_path)?;
    let did = Did::web(host)?;
    commands::didweb_emit(&key_path, &did, docs, None)?;
    Ok(Issuer {
        key: commands::read_key(&key_path)?,
        did,
    })
}
