//! Blocking client over any byte stream (TCP or loopback).

use std::collections::VecDeque;
use std::io::{self, Read, Write};

use daxiot_core::credential::{Disclosure, SdJwtCredential};
use daxiot_core::crypto::SigningKeyPair;
use daxiot_core::did::{Did, ResolverRegistry};
use daxiot_core::protocol::{ClientSession, Packet, PacketKind, ProtocolError, ReasonCode, WireError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("transport: {0}")]
    Io(#[from] io::Error),
    #[error("broker closed the connection")]
    Closed,
    #[error("broker disconnected with {0:?}")]
    Disconnected(ReasonCode),
}

impl ClientError {
    pub fn class(&self) -> &'static str {
        match self {
            ClientError::Protocol(e) => e.class(),
            ClientError::Io(_) => "Transport",
            ClientError::Closed => "Closed",
            ClientError::Disconnected(_) => "Disconnected",
        }
    }
}

impl From<WireError> for ClientError {
    fn from(e: WireError) -> Self {
        match e {
            WireError::Io(io) => ClientError::Io(io),
            other => ClientError::Protocol(other.into()),
        }
    }
}

/// Handshake milestones reported to [`Connection::establish_traced`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Milestone {
    /// Ephemeral identity generated and `K_ES` derived.
    EphemeralReady,
    ConnectSent,
    /// The challenge opened under `K_1PU`: the broker is authenticated.
    BrokerAuthenticated,
    ResponseSent,
    ConnAckReceived,
}

/// An established DAXiot session on a stream.
pub struct Connection<S> {
    stream: S,
    session: ClientSession,
    inbox: VecDeque<(String, Vec<u8>)>,
}

impl<S: Read + Write> Connection<S> {
    /// Runs steps A-H over `stream`.
    pub fn establish(
        stream: S,
        key: &SigningKeyPair,
        broker: &Did,
        registry: &ResolverRegistry,
        credential: &SdJwtCredential,
        disclosures: &[Disclosure],
    ) -> Result<Self, ClientError> {
        Self::establish_traced(stream, key, broker, registry, credential, disclosures, |_| {})
    }

    pub fn establish_traced(
        mut stream: S,
        key: &SigningKeyPair,
        broker: &Did,
        registry: &ResolverRegistry,
        credential: &SdJwtCredential,
        disclosures: &[Disclosure],
        mut trace: impl FnMut(Milestone),
    ) -> Result<Self, ClientError> {
        let (mut session, connect) = ClientSession::begin_connect(key, broker, registry)?;
        trace(Milestone::EphemeralReady);
        connect.write_to(&mut stream)?;
        trace(Milestone::ConnectSent);
        let challenge = read_packet(&mut stream, &mut session)?;
        let response = session.handle_challenge(&challenge, credential, disclosures)?;
        trace(Milestone::BrokerAuthenticated);
        response.write_to(&mut stream)?;
        trace(Milestone::ResponseSent);
        let ack = read_packet(&mut stream, &mut session)?;
        session.handle_connack(&ack)?;
        trace(Milestone::ConnAckReceived);
        Ok(Self {
            stream,
            session,
            inbox: VecDeque::new(),
        })
    }

    pub fn session(&self) -> &ClientSession {
        &self.session
    }

    /// Subscribes and waits for the SubAck.
    pub fn subscribe(&mut self, topic: &str) -> Result<ReasonCode, ClientError> {
        self.session.subscribe(topic)?.write_to(&mut self.stream)?;
        loop {
            let p = self.next_packet()?;
            if p.kind() == PacketKind::SubAck {
                return Ok(self.session.handle_suback(&p)?.1);
            }
            self.unexpected(p)?;
        }
    }

    /// Publishes and waits for the PubAck.
    pub fn publish(&mut self, topic: &str, payload: &[u8]) -> Result<ReasonCode, ClientError> {
        self.session.publish(topic, payload)?.write_to(&mut self.stream)?;
        loop {
            let p = self.next_packet()?;
            if p.kind() == PacketKind::PubAck {
                return Ok(self.session.handle_puback(&p)?);
            }
            self.unexpected(p)?;
        }
    }

    /// Next message delivered on a subscribed topic.
    pub fn recv(&mut self) -> Result<(String, Vec<u8>), ClientError> {
        if let Some(m) = self.inbox.pop_front() {
            return Ok(m);
        }
        loop {
            let p = self.next_packet()?;
            if p.kind() == PacketKind::Publish {
                return Ok(self.session.handle_publish(&p)?);
            }
            self.unexpected(p)?;
        }
    }

    pub fn disconnect(mut self) -> Result<(), ClientError> {
        self.session.disconnect().write_to(&mut self.stream)?;
        Ok(())
    }

    pub fn into_stream(self) -> S {
        self.stream
    }

    fn next_packet(&mut self) -> Result<Packet, ClientError> {
        read_packet(&mut self.stream, &mut self.session)
    }

    /// Queues deliveries that arrive while waiting for an ack; anything else
    /// is a protocol violation.
    fn unexpected(&mut self, p: Packet) -> Result<(), ClientError> {
        if p.kind() == PacketKind::Publish {
            let m = self.session.handle_publish(&p)?;
            self.inbox.push_back(m);
            return Ok(());
        }
        Err(ProtocolError::OutOfOrder {
            got: p.kind(),
            phase: "established",
        }
        .into())
    }
}

fn read_packet(stream: &mut impl Read, session: &mut ClientSession) -> Result<Packet, ClientError> {
    let p = Packet::read_from(stream)?.ok_or(ClientError::Closed)?;
    if let Packet::Disconnect { .. } = p {
        let reason = session.handle_disconnect(&p)?;
        return Err(ClientError::Disconnected(reason));
    }
    Ok(p)
}

impl<S> std::fmt::Debug for Connection<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Connection").field("session", &self.session).finish_non_exhaustive()
    }
}
