#![allow(dead_code)]

use std::path::PathBuf;
use std::time::{Duration, Instant};

use daxiot_broker::{Broker, BrokerConfig, Capture, ClientError, Connection, EventLog, LogLevel, LoopbackStream};
use daxiot_core::credential::{issue, AuthorizationClaim, Disclosure, RevocationRegistry, SdJwtCredential, TrustedIssuerList};
use daxiot_core::crypto::{generate_signing_keypair, to_agreement_keypair, SigningKeyPair};
use daxiot_core::did::{didkey_encode, Did, DidDocument, DirectorySource, ResolverRegistry};
use tempfile::TempDir;

pub const BROKER1: &str = "did:web:broker1.com";
pub const BROKER2: &str = "did:web:broker2.com";
pub const SECRET_TOPICS: [&str; 3] = [
    "secret-broker2-subscribe-topic",
    "secret-broker2-publish-topic-a",
    "secret-broker2-publish-topic-b",
];

pub struct Issuer {
    pub key: SigningKeyPair,
    pub did: Did,
}

pub struct Device {
    pub key: SigningKeyPair,
    pub did: Did,
    pub jti: String,
    pub credential: SdJwtCredential,
    pub disclosures: Vec<Disclosure>,
}

/// A broker deployment laid out on disk the way an operator would.
pub struct Site {
    pub dir: TempDir,
    pub config: BrokerConfig,
    pub config_path: PathBuf,
    pub docs: DirectorySource,
    pub registry: ResolverRegistry,
    pub issuer: Issuer,
    pub broker_key: SigningKeyPair,
}

pub fn doc(did: &Did, kp: &SigningKeyPair, endpoint: Option<&str>) -> DidDocument {
    DidDocument {
        id: did.clone(),
        verification_key: kp.public(),
        agreement_key: to_agreement_keypair(kp).public(),
        service_endpoint: endpoint.map(str::to_string),
    }
}

impl Site {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let docs = DirectorySource::new(dir.path().join("did-web"));
        let broker_key = generate_signing_keypair(None).unwrap();
        let broker_did: Did = BROKER1.parse().unwrap();
        broker_key.write_seed_file(dir.path().join("broker.seed")).unwrap();
        docs.store(&doc(&broker_did, &broker_key, Some("tcp://127.0.0.1:1883"))).unwrap();
        let issuer = Site::new_issuer(&docs, "issuer.com");
        [issuer.did.clone()]
            .into_iter()
            .collect::<TrustedIssuerList>()
            .save(dir.path().join("til.json"))
            .unwrap();
        RevocationRegistry::new().save(dir.path().join("rr.json")).unwrap();
        let config = BrokerConfig {
            listen_address: "127.0.0.1:0".into(),
            broker_did,
            signing_key_path: "broker.seed".into(),
            til_path: "til.json".into(),
            rr_path: "rr.json".into(),
            did_web_dir: "did-web".into(),
            log_level: LogLevel::Debug,
        };
        let config_path = dir.path().join("broker.json");
        config.save(&config_path).unwrap();
        let config = BrokerConfig::load(&config_path).unwrap();
        Self {
            registry: ResolverRegistry::directory(docs.dir()),
            dir,
            config,
            config_path,
            docs,
            issuer,
            broker_key,
        }
    }

    pub fn new_issuer(docs: &DirectorySource, host: &str) -> Issuer {
        let key = generate_signing_keypair(None).unwrap();
        let did = Did::web(host).unwrap();
        docs.store(&doc(&did, &key, None)).unwrap();
        Issuer { key, did }
    }

    pub fn broker(&self) -> (Broker, Capture) {
        let log = Capture::new();
        let broker = Broker::from_config(&self.config, EventLog::new(LogLevel::Debug, log.clone())).unwrap();
        (broker, log)
    }

    pub fn device(&self, jti: &str, sub: &[&str], publ: &[&str]) -> Device {
        self.device_of(&self.issuer, jti, sub, publ)
    }

    /// Two-broker credential: one claim for this broker, one for
    /// broker2 that must never reach this broker.
    pub fn device_of(&self, issuer: &Issuer, jti: &str, sub: &[&str], publ: &[&str]) -> Device {
        let key = generate_signing_keypair(None).unwrap();
        let did = didkey_encode(&key.public()).unwrap();
        let claims = vec![
            AuthorizationClaim::new(BROKER1.parse().unwrap(), sub.to_vec(), publ.to_vec()),
            AuthorizationClaim::new(BROKER2.parse().unwrap(), vec![SECRET_TOPICS[0]], SECRET_TOPICS[1..].to_vec()),
        ];
        let (credential, disclosures) = issue(&issuer.key, &issuer.did, &did, &claims, jti).unwrap();
        Device {
            key,
            did,
            jti: jti.into(),
            credential,
            disclosures,
        }
    }

    pub fn connect(&self, broker: &Broker, device: &Device) -> Result<Connection<LoopbackStream>, ClientError> {
        self.connect_on(broker.connect_loopback(None), device)
    }

    pub fn connect_on<S: std::io::Read + std::io::Write>(&self, stream: S, device: &Device) -> Result<Connection<S>, ClientError> {
        Connection::establish(
            stream,
            &device.key,
            &BROKER1.parse().unwrap(),
            &self.registry,
            &device.credential,
            &device.disclosures,
        )
    }

    pub fn til_path(&self) -> PathBuf {
        self.config.til_path.clone()
    }

    pub fn rr_path(&self) -> PathBuf {
        self.config.rr_path.clone()
    }
}

/// Polls `cond` for up to two seconds.
pub fn eventually(mut cond: impl FnMut() -> bool) -> bool {
    let deadline = Instant::now() + Duration::from_secs(2);
    while Instant::now() < deadline {
        if cond() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    cond()
}

/// Reason of the last event named `event` in a captured log.
pub fn last_reason(log: &Capture, event: &str) -> Option<String> {
    log.events().into_iter().rev().find(|e| e.event == event).and_then(|e| e.reason)
}
