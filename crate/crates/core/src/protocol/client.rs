use std::collections::VecDeque;

use super::packet::{aad, Packet, PacketKind, ReasonCode, AUTH_METHOD};
use super::ProtocolError;
use crate::credential::{present, Disclosure, SdJwtCredential};
use crate::crypto::{
    aead_decrypt, aead_encrypt, ecdh_1pu_sender, ecdh_es, generate_signing_keypair, kdf_info,
    to_agreement_keypair, AeadEnvelope, AgreementKeyPair, Nonce, SessionKey, SigningKeyPair,
    CONTEXT_1PU, CONTEXT_ES, NONCE_LEN, NONCE_PREFIX_LEN,
};
use crate::did::{didkey_encode, Did, DidDocument, ResolverRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientPhase {
    ConnectSent,
    Challenged,
    Established,
    Closed,
}

impl ClientPhase {
    fn describe(self) -> &'static str {
        match self {
            ClientPhase::ConnectSent => "awaiting challenge",
            ClientPhase::Challenged => "awaiting connack",
            ClientPhase::Established => "established",
            ClientPhase::Closed => "closed",
        }
    }
}

/// Client side of one broker connection. A fresh ephemeral identity is
/// generated per connection so separate connections are unlinkable.
pub struct ClientSession {
    phase: ClientPhase,
    static_did: Did,
    static_agreement: AgreementKeyPair,
    ephemeral_did: Did,
    ephemeral_agreement: AgreementKeyPair,
    broker_doc: DidDocument,
    k_es: SessionKey,
    k_1pu: Option<SessionKey>,
    send_nonce: Option<Nonce>,
    recv_prefix: [u8; NONCE_PREFIX_LEN],
    last_recv_counter: u64,
    pending_subscribes: VecDeque<String>,
    pending_publishes: usize,
}

impl std::fmt::Debug for ClientSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClientSession")
            .field("phase", &self.phase)
            .field("ephemeral_did", &self.ephemeral_did.to_string())
            .field("broker", &self.broker_doc.id.to_string())
            .finish_non_exhaustive()
    }
}

impl ClientSession {
    /// Steps A-B: resolves the broker, creates the ephemeral identity and
    /// the Connect packet carrying the ES-encrypted static DID.
    pub fn begin_connect(
        static_kp: &SigningKeyPair,
        broker_did: &Did,
        registry: &ResolverRegistry,
    ) -> Result<(Self, Packet), ProtocolError> {
        let broker_doc = registry.resolve(broker_did)?;
        Self::connect_to(static_kp, broker_doc)
    }

    /// Same as [`begin_connect`](Self::begin_connect) with an already
    /// resolved broker document.
    pub fn connect_to(
        static_kp: &SigningKeyPair,
        broker_doc: DidDocument,
    ) -> Result<(Self, Packet), ProtocolError> {
        let ephemeral = generate_signing_keypair(None)?;
        let ephemeral_did = didkey_encode(&ephemeral.public())?;
        let ephemeral_agreement = to_agreement_keypair(&ephemeral);
        let static_did = didkey_encode(&static_kp.public())?;

        let ctx = kdf_info(
            CONTEXT_ES,
            &ephemeral_did.to_string(),
            &broker_doc.id.to_string(),
        );
        let k_es = ecdh_es(&ephemeral_agreement, &broker_doc.agreement_key, &ctx)?;
        let auth_data = aead_encrypt(
            &k_es,
            Nonce::random(),
            static_did.to_string().as_bytes(),
            &aad(PacketKind::Connect, &ephemeral_did),
        );
        let packet = Packet::Connect {
            client_id: ephemeral_did.to_string(),
            auth_method: AUTH_METHOD.into(),
            auth_data,
        };
        let session = Self {
            phase: ClientPhase::ConnectSent,
            static_did,
            static_agreement: to_agreement_keypair(static_kp),
            ephemeral_did,
            ephemeral_agreement,
            broker_doc,
            k_es,
            k_1pu: None,
            send_nonce: None,
            recv_prefix: [0; NONCE_PREFIX_LEN],
            last_recv_counter: 0,
            pending_subscribes: VecDeque::new(),
            pending_publishes: 0,
        };
        Ok((session, packet))
    }

    /// Steps E-F: derives the 1PU key, opens `N_P` (which authenticates the
    /// broker) and answers with the presentation for this broker.
    pub fn handle_challenge(
        &mut self,
        packet: &Packet,
        credential: &SdJwtCredential,
        disclosures: &[Disclosure],
    ) -> Result<Packet, ProtocolError> {
        let result = self.handle_challenge_inner(packet, credential, disclosures);
        self.close_on_error(result)
    }

    fn handle_challenge_inner(
        &mut self,
        packet: &Packet,
        credential: &SdJwtCredential,
        disclosures: &[Disclosure],
    ) -> Result<Packet, ProtocolError> {
        self.expect_phase(ClientPhase::ConnectSent, packet)?;
        let Packet::AuthChallenge { auth_data } = packet else {
            return Err(self.out_of_order(packet));
        };
        let ctx = kdf_info(
            CONTEXT_1PU,
            &self.static_did.to_string(),
            &self.broker_doc.id.to_string(),
        );
        let k_1pu = ecdh_1pu_sender(
            &self.static_agreement,
            &self.ephemeral_agreement,
            &self.broker_doc.agreement_key,
            &ctx,
        )?;
        let raw = aead_decrypt(&k_1pu, auth_data, &self.aad(PacketKind::AuthChallenge))
            .map_err(|_| ProtocolError::BrokerAuthentication)?;
        if raw.len() != NONCE_LEN {
            return Err(ProtocolError::Malformed("challenge nonce"));
        }
        let n_p = Nonce::from_bytes(&raw)?;

        let presentation = present(credential, disclosures, &self.broker_doc.id)?;
        let response = aead_encrypt(
            &k_1pu,
            n_p,
            presentation.to_compact().as_bytes(),
            &self.aad(PacketKind::AuthResponse),
        );
        self.send_nonce = Some(n_p.next()?);
        self.k_1pu = Some(k_1pu);
        self.phase = ClientPhase::Challenged;
        Ok(Packet::AuthResponse {
            auth_data: response,
        })
    }

    /// Step H on the client: a successful ConnAck proves knowledge of the
    /// 1PU key over the announced outbound prefix.
    pub fn handle_connack(&mut self, packet: &Packet) -> Result<(), ProtocolError> {
        let result = self.handle_connack_inner(packet);
        self.close_on_error(result)
    }

    fn handle_connack_inner(&mut self, packet: &Packet) -> Result<(), ProtocolError> {
        self.expect_phase(ClientPhase::Challenged, packet)?;
        let Packet::ConnAck {
            reason,
            nonce_prefix,
            auth_data,
        } = packet
        else {
            return Err(self.out_of_order(packet));
        };
        if *reason != ReasonCode::Success {
            return Err(ProtocolError::Rejected {
                kind: PacketKind::ConnAck,
                reason: *reason,
            });
        }
        let (Some(prefix), Some(env)) = (nonce_prefix, auth_data) else {
            return Err(ProtocolError::Malformed("connack"));
        };
        if env.nonce != Nonce::new(*prefix, 0) {
            return Err(ProtocolError::BrokerAuthentication);
        }
        let key = self.k_1pu.as_ref().expect("1PU key exists once challenged");
        let proof = aead_decrypt(key, env, &self.aad(PacketKind::ConnAck))
            .map_err(|_| ProtocolError::BrokerAuthentication)?;
        if proof != prefix {
            return Err(ProtocolError::BrokerAuthentication);
        }
        self.recv_prefix = *prefix;
        self.last_recv_counter = 0;
        self.phase = ClientPhase::Established;
        Ok(())
    }

    /// Step I: topic encrypted under the next send nonce.
    pub fn subscribe(&mut self, topic: &str) -> Result<Packet, ProtocolError> {
        self.require_established(PacketKind::Subscribe)?;
        let nonce = self.take_nonces(1)?;
        let topic_env = self.seal(nonce, topic.as_bytes(), PacketKind::Subscribe);
        self.pending_subscribes.push_back(topic.to_string());
        Ok(Packet::Subscribe { topic: topic_env })
    }

    /// Returns the topic the acknowledgement refers to.
    pub fn handle_suback(
        &mut self,
        packet: &Packet,
    ) -> Result<(String, ReasonCode), ProtocolError> {
        let Packet::SubAck { reason } = packet else {
            return Err(self.out_of_order(packet));
        };
        let topic = self
            .pending_subscribes
            .pop_front()
            .ok_or(ProtocolError::OutOfOrder {
                got: PacketKind::SubAck,
                phase: "no subscribe outstanding",
            })?;
        Ok((topic, *reason))
    }

    /// Step J: topic at counter `n`, payload at `n + 1`.
    pub fn publish(&mut self, topic: &str, payload: &[u8]) -> Result<Packet, ProtocolError> {
        self.require_established(PacketKind::Publish)?;
        let first = self.take_nonces(2)?;
        let second = first.next()?;
        let packet = Packet::Publish {
            topic: self.seal(first, topic.as_bytes(), PacketKind::Publish),
            payload: self.seal(second, payload, PacketKind::Publish),
        };
        self.pending_publishes += 1;
        Ok(packet)
    }

    pub fn handle_puback(&mut self, packet: &Packet) -> Result<ReasonCode, ProtocolError> {
        let Packet::PubAck { reason } = packet else {
            return Err(self.out_of_order(packet));
        };
        if self.pending_publishes == 0 {
            return Err(ProtocolError::OutOfOrder {
                got: PacketKind::PubAck,
                phase: "no publish outstanding",
            });
        }
        self.pending_publishes -= 1;
        Ok(*reason)
    }

    /// Opens a Publish forwarded by the broker. Counters must increase and
    /// the payload must sit right after the topic.
    pub fn handle_publish(&mut self, packet: &Packet) -> Result<(String, Vec<u8>), ProtocolError> {
        let result = self.handle_publish_inner(packet);
        self.close_on_error(result)
    }

    fn handle_publish_inner(
        &mut self,
        packet: &Packet,
    ) -> Result<(String, Vec<u8>), ProtocolError> {
        self.expect_phase(ClientPhase::Established, packet)?;
        let Packet::Publish { topic, payload } = packet else {
            return Err(self.out_of_order(packet));
        };
        if topic.nonce.prefix != self.recv_prefix || payload.nonce.prefix != self.recv_prefix {
            return Err(ProtocolError::Integrity);
        }
        if topic.nonce.counter <= self.last_recv_counter {
            return Err(ProtocolError::CounterRegression);
        }
        if topic.nonce.next().ok() != Some(payload.nonce) {
            return Err(ProtocolError::Replay);
        }
        let key = self
            .k_1pu
            .as_ref()
            .expect("1PU key exists once established");
        let ad = self.aad(PacketKind::Publish);
        let t = aead_decrypt(key, topic, &ad).map_err(|_| ProtocolError::Integrity)?;
        let pl = aead_decrypt(key, payload, &ad).map_err(|_| ProtocolError::Integrity)?;
        let t = String::from_utf8(t).map_err(|_| ProtocolError::Malformed("topic"))?;
        self.last_recv_counter = payload.nonce.counter;
        Ok((t, pl))
    }

    /// Any broker Disconnect ends the session.
    pub fn handle_disconnect(&mut self, packet: &Packet) -> Result<ReasonCode, ProtocolError> {
        let Packet::Disconnect { reason } = packet else {
            return Err(self.out_of_order(packet));
        };
        self.phase = ClientPhase::Closed;
        Ok(*reason)
    }

    pub fn disconnect(&mut self) -> Packet {
        self.phase = ClientPhase::Closed;
        Packet::Disconnect {
            reason: ReasonCode::Success,
        }
    }

    pub fn phase(&self) -> ClientPhase {
        self.phase
    }

    pub fn ephemeral_did(&self) -> &Did {
        &self.ephemeral_did
    }

    pub fn static_did(&self) -> &Did {
        &self.static_did
    }

    pub fn broker_did(&self) -> &Did {
        &self.broker_doc.id
    }

    pub fn es_key(&self) -> &SessionKey {
        &self.k_es
    }

    /// The 1PU session key, once the challenge has been opened.
    pub fn session_key(&self) -> Option<&SessionKey> {
        self.k_1pu.as_ref()
    }

    /// Next nonce this client will use towards the broker.
    pub fn send_nonce(&self) -> Option<Nonce> {
        self.send_nonce
    }

    fn take_nonces(&mut self, count: u64) -> Result<Nonce, ProtocolError> {
        let current = self.send_nonce.expect("send nonce exists once established");
        let mut next = current;
        for _ in 0..count {
            next = next.next()?;
        }
        self.send_nonce = Some(next);
        Ok(current)
    }

    fn seal(&self, nonce: Nonce, plaintext: &[u8], kind: PacketKind) -> AeadEnvelope {
        let key = self
            .k_1pu
            .as_ref()
            .expect("1PU key exists once established");
        aead_encrypt(key, nonce, plaintext, &self.aad(kind))
    }

    fn aad(&self, kind: PacketKind) -> Vec<u8> {
        aad(kind, &self.ephemeral_did)
    }

    fn require_established(&self, kind: PacketKind) -> Result<(), ProtocolError> {
        if self.phase != ClientPhase::Established {
            return Err(ProtocolError::OutOfOrder {
                got: kind,
                phase: self.phase.describe(),
            });
        }
        Ok(())
    }

    fn expect_phase(&self, phase: ClientPhase, packet: &Packet) -> Result<(), ProtocolError> {
        if self.phase != phase {
            return Err(self.out_of_order(packet));
        }
        Ok(())
    }

    fn out_of_order(&self, packet: &Packet) -> ProtocolError {
        ProtocolError::OutOfOrder {
            got: packet.kind(),
            phase: self.phase.describe(),
        }
    }

    fn close_on_error<T>(&mut self, result: Result<T, ProtocolError>) -> Result<T, ProtocolError> {
        if result.is_err() {
            self.phase = ClientPhase::Closed;
        }
        result
    }
}
