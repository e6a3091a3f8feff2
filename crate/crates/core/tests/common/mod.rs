#![allow(dead_code)]

use std::sync::{Arc, RwLock};

use daxiot_core::credential::{
    issue, AuthorizationClaim, Disclosure, SdJwtCredential, TrustedIssuerList,
};
use daxiot_core::crypto::{generate_signing_keypair, to_agreement_keypair, SigningKeyPair};
use daxiot_core::did::{didkey_encode, Did, DidDocument, MemorySource, ResolverRegistry};
use daxiot_core::protocol::{
    BrokerCore, BrokerIdentity, ClientSession, Packet, ReasonCode, StaticTrust,
};

pub const BROKER1: &str = "did:web:broker1.com";
pub const BROKER2: &str = "did:web:broker2.com";
pub const ISSUER: &str = "did:web:issuer.com";

pub struct Device {
    pub key: SigningKeyPair,
    pub did: Did,
    pub credential: SdJwtCredential,
    pub disclosures: Vec<Disclosure>,
}

pub struct World {
    pub source: Arc<MemorySource>,
    pub registry: ResolverRegistry,
    pub issuer: SigningKeyPair,
    pub issuer_did: Did,
    pub broker_key: SigningKeyPair,
    pub broker_did: Did,
    pub trust: Arc<RwLock<StaticTrust>>,
}

pub fn web_doc(did: &Did, kp: &SigningKeyPair, endpoint: Option<&str>) -> DidDocument {
    DidDocument {
        id: did.clone(),
        verification_key: kp.public(),
        agreement_key: to_agreement_keypair(kp).public(),
        service_endpoint: endpoint.map(str::to_string),
    }
}

impl World {
    pub fn new() -> Self {
        let source = Arc::new(MemorySource::new());
        let issuer = generate_signing_keypair(None).unwrap();
        let issuer_did: Did = ISSUER.parse().unwrap();
        let broker_key = generate_signing_keypair(None).unwrap();
        let broker_did: Did = BROKER1.parse().unwrap();
        source.insert(&web_doc(&issuer_did, &issuer, None));
        source.insert(&web_doc(
            &broker_did,
            &broker_key,
            Some("tcp://127.0.0.1:1883"),
        ));
        let trust = StaticTrust {
            til: [issuer_did.clone()]
                .into_iter()
                .collect::<TrustedIssuerList>(),
            ..Default::default()
        };
        Self {
            registry: ResolverRegistry::new(source.clone()),
            source,
            issuer,
            issuer_did,
            broker_key,
            broker_did,
            trust: Arc::new(RwLock::new(trust)),
        }
    }

    pub fn broker(&self) -> BrokerCore {
        BrokerCore::new(
            BrokerIdentity::new(self.broker_did.clone(), &self.broker_key),
            self.registry.clone(),
            self.trust.clone(),
        )
    }

    /// A device whose credential carries one claim for broker1 and one for
    /// broker2.
    pub fn device(&self, jti: &str, b1_sub: &[&str], b1_pub: &[&str]) -> Device {
        let key = generate_signing_keypair(None).unwrap();
        let did = didkey_encode(&key.public()).unwrap();
        let claims = vec![
            AuthorizationClaim::new(BROKER1.parse().unwrap(), b1_sub.to_vec(), b1_pub.to_vec()),
            AuthorizationClaim::new(
                BROKER2.parse().unwrap(),
                vec!["secret-broker2-sub-topic"],
                vec!["secret-broker2-pub-topic-a", "secret-broker2-pub-topic-b"],
            ),
        ];
        let (credential, disclosures) =
            issue(&self.issuer, &self.issuer_did, &did, &claims, jti).unwrap();
        Device {
            key,
            did,
            credential,
            disclosures,
        }
    }
}

/// Runs steps A-H and returns the client, its session id and the packets
/// exchanged in order.
pub fn establish(
    world: &World,
    broker: &mut BrokerCore,
    device: &Device,
) -> (ClientSession, String, Vec<Packet>) {
    let mut trace = Vec::new();
    let (mut client, connect) =
        ClientSession::begin_connect(&device.key, &world.broker_did, &world.registry).unwrap();
    trace.push(connect.clone());
    let out = broker.handle(None, &connect);
    assert!(out.error.is_none(), "connect: {:?}", out.error);
    let id = out.session.unwrap();
    let challenge = out.reply.unwrap();
    trace.push(challenge.clone());
    let response = client
        .handle_challenge(&challenge, &device.credential, &device.disclosures)
        .unwrap();
    trace.push(response.clone());
    let out = broker.handle(Some(&id), &response);
    assert!(out.error.is_none(), "auth: {:?}", out.error);
    let connack = out.reply.unwrap();
    trace.push(connack.clone());
    client.handle_connack(&connack).unwrap();
    (client, id, trace)
}

pub fn subscribe(
    broker: &mut BrokerCore,
    client: &mut ClientSession,
    id: &str,
    topic: &str,
) -> ReasonCode {
    let pkt = client.subscribe(topic).unwrap();
    let out = broker.handle(Some(id), &pkt);
    assert!(out.error.is_none(), "subscribe: {:?}", out.error);
    client.handle_suback(&out.reply.unwrap()).unwrap().1
}
