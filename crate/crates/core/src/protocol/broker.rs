use std::collections::{HashMap, HashSet};

use super::packet::{aad, Packet, PacketKind, ReasonCode, AUTH_METHOD};
use super::topics::TopicTable;
use super::ProtocolError;
use crate::credential::{
    verify_presentation, AuthorizationGrant, CredentialError, Presentation, RevocationRegistry,
    TrustedIssuerList,
};
use crate::crypto::{
    aead_decrypt, aead_encrypt, ecdh_1pu_receiver, ecdh_es, ed25519_public_to_x25519, kdf_info,
    to_agreement_keypair, AeadEnvelope, AgreementKeyPair, Nonce, SessionKey, SigningKeyPair,
    CONTEXT_1PU, CONTEXT_ES,
};
use crate::did::{didkey_decode, Did, DidDocument, DidError, DidMethod, ResolverRegistry};

/// The broker's own DID and agreement key.
pub struct BrokerIdentity {
    did: Did,
    verification_key: [u8; 32],
    agreement: AgreementKeyPair,
}

impl BrokerIdentity {
    pub fn new(did: Did, signing: &SigningKeyPair) -> Self {
        Self {
            did,
            verification_key: signing.public(),
            agreement: to_agreement_keypair(signing),
        }
    }

    pub fn did(&self) -> &Did {
        &self.did
    }

    /// True when `doc` publishes exactly this identity's keys.
    pub fn matches_document(&self, doc: &DidDocument) -> bool {
        doc.id == self.did
            && doc.verification_key == self.verification_key
            && doc.agreement_key == self.agreement.public()
    }
}

impl std::fmt::Debug for BrokerIdentity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BrokerIdentity")
            .field("did", &self.did.to_string())
            .finish()
    }
}

/// ES-stage nonces already accepted, per ephemeral DID.
#[derive(Debug, Default)]
pub struct ReplayCache {
    seen: HashSet<(String, Nonce)>,
}

impl ReplayCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, sender: &Did, nonce: &Nonce) -> bool {
        self.seen.contains(&(sender.to_string(), *nonce))
    }

    pub fn insert(&mut self, sender: &Did, nonce: Nonce) -> bool {
        self.seen.insert((sender.to_string(), nonce))
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrokerPhase {
    AwaitAuth,
    Established,
}

/// Broker-side state of one client session.
pub struct BrokerSession {
    ephemeral_did: Did,
    static_did: Did,
    k_es: SessionKey,
    k_1pu: SessionKey,
    expected_nonce: Nonce,
    outbound_nonce: Option<Nonce>,
    grant: AuthorizationGrant,
    phase: BrokerPhase,
}

impl std::fmt::Debug for BrokerSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BrokerSession")
            .field("ephemeral_did", &self.ephemeral_did.to_string())
            .field("phase", &self.phase)
            .field("expected_counter", &self.expected_nonce.counter)
            .finish_non_exhaustive()
    }
}

/// Result of opening a client Publish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublishDecision {
    pub topic: String,
    pub payload: Vec<u8>,
    pub granted: bool,
}

/// Steps C-D. Authenticates the ephemeral DID through the ES key, opens the
/// static DID, derives the 1PU key and issues the challenge `N_P`.
pub fn broker_handle_connect(
    packet: &Packet,
    identity: &BrokerIdentity,
    registry: &ResolverRegistry,
    replay: &mut ReplayCache,
) -> Result<(BrokerSession, Packet), ProtocolError> {
    let Packet::Connect {
        client_id,
        auth_method,
        auth_data,
    } = packet
    else {
        return Err(ProtocolError::OutOfOrder {
            got: packet.kind(),
            phase: "awaiting connect",
        });
    };
    if auth_method != AUTH_METHOD {
        return Err(ProtocolError::ProtocolMismatch(auth_method.clone()));
    }
    let ephemeral_did: Did = client_id.parse()?;
    if ephemeral_did.method() != DidMethod::Key {
        return Err(DidError::NotDidKey.into());
    }
    if replay.contains(&ephemeral_did, &auth_data.nonce) {
        return Err(ProtocolError::Replay);
    }
    let ephemeral_x = ed25519_public_to_x25519(&didkey_decode(&ephemeral_did)?)?;
    let broker_did = identity.did.to_string();

    let es_ctx = kdf_info(CONTEXT_ES, client_id, &broker_did);
    let k_es = ecdh_es(&identity.agreement, &ephemeral_x, &es_ctx)?;
    let static_raw = aead_decrypt(&k_es, auth_data, &aad(PacketKind::Connect, &ephemeral_did))
        .map_err(|_| ProtocolError::ClientAuthentication)?;
    replay.insert(&ephemeral_did, auth_data.nonce);

    let static_did: Did = std::str::from_utf8(&static_raw)
        .map_err(|_| ProtocolError::Malformed("static DID"))?
        .parse()?;
    let static_doc = registry.resolve(&static_did)?;
    let pu_ctx = kdf_info(CONTEXT_1PU, &static_did.to_string(), &broker_did);
    let k_1pu = ecdh_1pu_receiver(
        &identity.agreement,
        &ephemeral_x,
        &static_doc.agreement_key,
        &pu_ctx,
    )?;

    let n_p = Nonce::random();
    let mut wrap = Nonce::random();
    while wrap.prefix == n_p.prefix {
        wrap = Nonce::random();
    }
    let challenge = aead_encrypt(
        &k_1pu,
        wrap,
        &n_p.to_bytes(),
        &aad(PacketKind::AuthChallenge, &ephemeral_did),
    );
    let session = BrokerSession {
        ephemeral_did,
        static_did,
        k_es,
        k_1pu,
        expected_nonce: n_p,
        outbound_nonce: None,
        grant: AuthorizationGrant::default(),
        phase: BrokerPhase::AwaitAuth,
    };
    Ok((
        session,
        Packet::AuthChallenge {
            auth_data: challenge,
        },
    ))
}

impl BrokerSession {
    /// Steps G-H. Returns the ConnAck and the decrypted presentation bytes.
    pub fn handle_auth(
        &mut self,
        packet: &Packet,
        broker_did: &Did,
        til: &TrustedIssuerList,
        rr: &RevocationRegistry,
        registry: &ResolverRegistry,
    ) -> Result<(Packet, Vec<u8>), ProtocolError> {
        let Packet::AuthResponse { auth_data } = packet else {
            return Err(self.out_of_order(packet.kind()));
        };
        self.check_nonce(auth_data)?;
        if self.phase != BrokerPhase::AwaitAuth {
            return Err(self.out_of_order(packet.kind()));
        }
        let plaintext = self.open(auth_data, PacketKind::AuthResponse)?;
        let compact = std::str::from_utf8(&plaintext)
            .map_err(|_| ProtocolError::Malformed("presentation"))?;
        let presentation = Presentation::parse(compact)?;
        let grant = verify_presentation(
            &presentation,
            &self.static_did,
            broker_did,
            til,
            rr,
            registry,
        )?;

        let next = self.expected_nonce.next()?;
        let outbound = Nonce::random();
        let proof = aead_encrypt(
            &self.k_1pu,
            outbound,
            &outbound.prefix,
            &aad(PacketKind::ConnAck, &self.ephemeral_did),
        );
        self.expected_nonce = next;
        self.outbound_nonce = Some(outbound.next()?);
        self.grant = grant;
        self.phase = BrokerPhase::Established;
        let connack = Packet::ConnAck {
            reason: ReasonCode::Success,
            nonce_prefix: Some(outbound.prefix),
            auth_data: Some(proof),
        };
        Ok((connack, plaintext))
    }

    /// Step I. Registers the subscription only when the topic is granted.
    pub fn handle_subscribe(
        &mut self,
        packet: &Packet,
        table: &mut TopicTable,
    ) -> Result<(Packet, String), ProtocolError> {
        let Packet::Subscribe { topic } = packet else {
            return Err(self.out_of_order(packet.kind()));
        };
        self.check_nonce(topic)?;
        self.require_established(packet.kind())?;
        let raw = self.open(topic, PacketKind::Subscribe)?;
        self.expected_nonce = self.expected_nonce.next()?;
        let topic = String::from_utf8(raw).map_err(|_| ProtocolError::Malformed("topic"))?;
        let reason = if self.grant.may_subscribe(&topic) {
            table.subscribe(&self.ephemeral_did.to_string(), &topic);
            ReasonCode::Success
        } else {
            ReasonCode::NotAuthorized
        };
        Ok((Packet::SubAck { reason }, topic))
    }

    /// Step J, inbound half: both fields must carry consecutive counters
    /// starting at the expected one.
    pub fn handle_publish(&mut self, packet: &Packet) -> Result<PublishDecision, ProtocolError> {
        let Packet::Publish { topic, payload } = packet else {
            return Err(self.out_of_order(packet.kind()));
        };
        self.check_nonce(topic)?;
        let after_topic = self.expected_nonce.next()?;
        if payload.nonce != after_topic {
            return Err(ProtocolError::Replay);
        }
        self.require_established(packet.kind())?;
        let t = self.open(topic, PacketKind::Publish)?;
        let pl = self.open(payload, PacketKind::Publish)?;
        self.expected_nonce = after_topic.next()?;
        let topic = String::from_utf8(t).map_err(|_| ProtocolError::Malformed("topic"))?;
        let granted = self.grant.may_publish(&topic);
        Ok(PublishDecision {
            topic,
            payload: pl,
            granted,
        })
    }

    /// Step J, outbound half: re-encrypts for this subscriber.
    pub fn forward(&mut self, topic: &str, payload: &[u8]) -> Result<Packet, ProtocolError> {
        self.require_established(PacketKind::Publish)?;
        let first = self
            .outbound_nonce
            .expect("outbound nonce exists once established");
        let second = first.next()?;
        let after = second.next()?;
        let ad = aad(PacketKind::Publish, &self.ephemeral_did);
        let packet = Packet::Publish {
            topic: aead_encrypt(&self.k_1pu, first, topic.as_bytes(), &ad),
            payload: aead_encrypt(&self.k_1pu, second, payload, &ad),
        };
        self.outbound_nonce = Some(after);
        Ok(packet)
    }

    pub fn ephemeral_did(&self) -> &Did {
        &self.ephemeral_did
    }

    pub fn static_did(&self) -> &Did {
        &self.static_did
    }

    pub fn phase(&self) -> BrokerPhase {
        self.phase
    }

    pub fn grant(&self) -> &AuthorizationGrant {
        &self.grant
    }

    pub fn es_key(&self) -> &SessionKey {
        &self.k_es
    }

    pub fn session_key(&self) -> &SessionKey {
        &self.k_1pu
    }

    /// Next counter accepted from the client.
    pub fn expected_nonce(&self) -> Nonce {
        self.expected_nonce
    }

    /// Next counter used towards the client, once established.
    pub fn outbound_nonce(&self) -> Option<Nonce> {
        self.outbound_nonce
    }

    fn check_nonce(&self, env: &AeadEnvelope) -> Result<(), ProtocolError> {
        if env.nonce != self.expected_nonce {
            return Err(ProtocolError::Replay);
        }
        Ok(())
    }

    fn open(&self, env: &AeadEnvelope, kind: PacketKind) -> Result<Vec<u8>, ProtocolError> {
        aead_decrypt(&self.k_1pu, env, &aad(kind, &self.ephemeral_did))
            .map_err(|_| ProtocolError::Integrity)
    }

    fn require_established(&self, got: PacketKind) -> Result<(), ProtocolError> {
        if self.phase != BrokerPhase::Established {
            return Err(self.out_of_order(got));
        }
        Ok(())
    }

    fn out_of_order(&self, got: PacketKind) -> ProtocolError {
        ProtocolError::OutOfOrder {
            got,
            phase: match self.phase {
                BrokerPhase::AwaitAuth => "awaiting auth response",
                BrokerPhase::Established => "established",
            },
        }
    }
}

/// Where the broker reads its trusted issuers and revocations from. Called
/// once per AuthResponse so edits apply to the next handshake.
pub trait TrustSource: Send + Sync {
    fn load(&self) -> Result<(TrustedIssuerList, RevocationRegistry), CredentialError>;
}

/// In-memory trust anchors.
#[derive(Debug, Clone, Default)]
pub struct StaticTrust {
    pub til: TrustedIssuerList,
    pub rr: RevocationRegistry,
}

impl TrustSource for StaticTrust {
    fn load(&self) -> Result<(TrustedIssuerList, RevocationRegistry), CredentialError> {
        Ok((self.til.clone(), self.rr.clone()))
    }
}

impl<T: TrustSource + ?Sized> TrustSource for std::sync::Arc<T> {
    fn load(&self) -> Result<(TrustedIssuerList, RevocationRegistry), CredentialError> {
        (**self).load()
    }
}

impl<T: TrustSource> TrustSource for std::sync::RwLock<T> {
    fn load(&self) -> Result<(TrustedIssuerList, RevocationRegistry), CredentialError> {
        self.read().unwrap_or_else(|e| e.into_inner()).load()
    }
}

/// What the transport should do after one inbound packet.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Session the packet belonged to; set by a successful Connect.
    pub session: Option<String>,
    pub reply: Option<Packet>,
    /// Re-encrypted publishes addressed to other sessions.
    pub forwards: Vec<(String, Packet)>,
    /// Sessions dropped while handling this packet (other than the sender).
    pub evicted: Vec<String>,
    /// Every plaintext the broker decrypted for this packet.
    pub decrypted: Vec<Vec<u8>>,
    pub error: Option<ProtocolError>,
    /// The sender's connection must be closed after sending `reply`.
    pub close: bool,
}

/// Sessions, routes and replay state of one broker. Not internally
/// synchronized; transports wrap it in a lock so every call is atomic.
pub struct BrokerCore {
    identity: BrokerIdentity,
    registry: ResolverRegistry,
    trust: Box<dyn TrustSource>,
    sessions: HashMap<String, BrokerSession>,
    topics: TopicTable,
    replay: ReplayCache,
}

impl BrokerCore {
    pub fn new(
        identity: BrokerIdentity,
        registry: ResolverRegistry,
        trust: impl TrustSource + 'static,
    ) -> Self {
        Self {
            identity,
            registry,
            trust: Box::new(trust),
            sessions: HashMap::new(),
            topics: TopicTable::new(),
            replay: ReplayCache::new(),
        }
    }

    pub fn identity(&self) -> &BrokerIdentity {
        &self.identity
    }

    pub fn set_trust(&mut self, trust: impl TrustSource + 'static) {
        self.trust = Box::new(trust);
    }

    pub fn session(&self, id: &str) -> Option<&BrokerSession> {
        self.sessions.get(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &BrokerSession> {
        self.sessions.values()
    }

    pub fn topics(&self) -> &TopicTable {
        &self.topics
    }

    /// Drops a session and its subscriptions. Returns whether it existed.
    pub fn remove_session(&mut self, id: &str) -> bool {
        self.topics.remove_session(id);
        self.sessions.remove(id).is_some()
    }

    /// Processes one packet from the connection bound to `session` (`None`
    /// before a successful Connect). Errors become a reply and a close; the
    /// offending session is evicted, no other session is touched.
    pub fn handle(&mut self, session: Option<&str>, packet: &Packet) -> Outcome {
        let mut outcome = Outcome {
            session: session.map(str::to_string),
            ..Outcome::default()
        };
        let result = match session {
            None => self.on_connect(packet, &mut outcome),
            Some(id) => self.on_session_packet(id, packet, &mut outcome),
        };
        if let Err(e) = result {
            let in_handshake = outcome
                .session
                .as_deref()
                .and_then(|id| self.sessions.get(id))
                .is_some_and(|s| s.phase == BrokerPhase::AwaitAuth);
            outcome.reply = Some(match &e {
                ProtocolError::Credential(_) if in_handshake => Packet::ConnAck {
                    reason: ReasonCode::NotAuthorized,
                    nonce_prefix: None,
                    auth_data: None,
                },
                e => Packet::Disconnect {
                    reason: e.reason_code(),
                },
            });
            if let Some(id) = outcome.session.as_deref() {
                self.remove_session(id);
            }
            outcome.error = Some(e);
            outcome.close = true;
        }
        outcome
    }

    fn on_connect(&mut self, packet: &Packet, outcome: &mut Outcome) -> Result<(), ProtocolError> {
        let (session, challenge) =
            broker_handle_connect(packet, &self.identity, &self.registry, &mut self.replay)?;
        let id = session.ephemeral_did.to_string();
        if self.sessions.contains_key(&id) {
            return Err(ProtocolError::DuplicateSession);
        }
        outcome
            .decrypted
            .push(session.static_did.to_string().into_bytes());
        self.sessions.insert(id.clone(), session);
        outcome.session = Some(id);
        outcome.reply = Some(challenge);
        Ok(())
    }

    fn on_session_packet(
        &mut self,
        id: &str,
        packet: &Packet,
        outcome: &mut Outcome,
    ) -> Result<(), ProtocolError> {
        if let Packet::Disconnect { .. } = packet {
            self.remove_session(id);
            outcome.close = true;
            return Ok(());
        }
        let Some(session) = self.sessions.get_mut(id) else {
            return Err(ProtocolError::OutOfOrder {
                got: packet.kind(),
                phase: "session closed",
            });
        };
        match packet {
            Packet::AuthResponse { .. } => {
                let (til, rr) = self.trust.load()?;
                let (ack, plaintext) =
                    session.handle_auth(packet, &self.identity.did, &til, &rr, &self.registry)?;
                outcome.decrypted.push(plaintext);
                outcome.reply = Some(ack);
            }
            Packet::Subscribe { .. } => {
                let (ack, topic) = session.handle_subscribe(packet, &mut self.topics)?;
                outcome.decrypted.push(topic.into_bytes());
                outcome.reply = Some(ack);
            }
            Packet::Publish { .. } => {
                let decision = session.handle_publish(packet)?;
                outcome.decrypted.push(decision.topic.clone().into_bytes());
                outcome.decrypted.push(decision.payload.clone());
                let reason = if decision.granted {
                    self.fan_out(&decision, outcome);
                    ReasonCode::Success
                } else {
                    ReasonCode::NotAuthorized
                };
                outcome.reply = Some(Packet::PubAck { reason });
            }
            other => {
                return Err(session.out_of_order(other.kind()));
            }
        }
        Ok(())
    }

    fn fan_out(&mut self, decision: &PublishDecision, outcome: &mut Outcome) {
        for sub in self.topics.subscribers(&decision.topic) {
            let Some(target) = self.sessions.get_mut(&sub) else {
                continue;
            };
            match target.forward(&decision.topic, &decision.payload) {
                Ok(p) => outcome.forwards.push((sub, p)),
                Err(e) => {
                    log::warn!("dropping subscriber {sub}: {e}");
                    self.remove_session(&sub);
                    outcome.evicted.push(sub);
                }
            }
        }
    }
}

impl std::fmt::Debug for BrokerCore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BrokerCore")
            .field("identity", &self.identity)
            .field("sessions", &self.sessions.len())
            .finish_non_exhaustive()
    }
}
