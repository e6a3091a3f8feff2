//! Unauthenticated plaintext broker and client, the benchmark baseline.
//!
//! Uses the same framing and packet kinds as DAXiot but carries client ids,
//! topics and payloads in the clear and accepts every client. Never use it
//! outside measurements.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;

use daxiot_core::protocol::{tag, Frame, PacketKind, ReasonCode, TopicTable, WireError};

use crate::client::ClientError;
use crate::transport::{spawn_writer, Link, Outgoing};

#[derive(Default)]
struct State {
    topics: TopicTable,
    links: HashMap<String, Link>,
}

/// A plaintext broker listening on TCP.
#[derive(Debug)]
pub struct PlainBroker {
    addr: SocketAddr,
}

impl PlainBroker {
    pub fn listen(addr: &str) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        let state = Arc::new(Mutex::new(State::default()));
        let ids = Arc::new(AtomicU64::new(0));
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let state = state.clone();
                let id = format!("plain-{}", ids.fetch_add(1, Ordering::Relaxed));
                let _ = serve(stream, id, state);
            }
        });
        Ok(Self { addr: local })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

fn lock(state: &Mutex<State>) -> MutexGuard<'_, State> {
    state.lock().unwrap_or_else(|e| e.into_inner())
}

fn ack(kind: PacketKind, reason: ReasonCode) -> Frame {
    Frame::new(kind.byte()).with(tag::REASON_CODE, [reason as u8])
}

fn serve(stream: TcpStream, id: String, state: Arc<Mutex<State>>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = stream.try_clone()?;
    let closer = stream.try_clone()?;
    let link = spawn_writer(stream, move || {
        let _ = closer.shutdown(std::net::Shutdown::Both);
    });
    lock(&state).links.insert(id.clone(), link.clone());
    thread::spawn(move || {
        while let Ok(Some(frame)) = Frame::read_from(&mut reader) {
            let mut st = lock(&state);
            let reply = match PacketKind::try_from(frame.kind) {
                Ok(PacketKind::Connect) => ack(PacketKind::ConnAck, ReasonCode::Success),
                Ok(PacketKind::Subscribe) => {
                    let topic = String::from_utf8_lossy(frame.field(tag::TOPIC).unwrap_or_default()).into_owned();
                    st.topics.subscribe(&id, &topic);
                    ack(PacketKind::SubAck, ReasonCode::Success)
                }
                Ok(PacketKind::Publish) => {
                    let topic = String::from_utf8_lossy(frame.field(tag::TOPIC).unwrap_or_default()).into_owned();
                    for sub in st.topics.subscribers(&topic) {
                        if let Some(l) = st.links.get(&sub) {
                            let _ = l.send(Outgoing::Frame(frame.clone()));
                        }
                    }
                    ack(PacketKind::PubAck, ReasonCode::Success)
                }
                _ => break,
            };
            let _ = link.send(Outgoing::Frame(reply));
        }
        let mut st = lock(&state);
        st.topics.remove_session(&id);
        st.links.remove(&id);
        let _ = link.send(Outgoing::Close);
    });
    Ok(())
}

/// Client for [`PlainBroker`].
#[derive(Debug)]
pub struct PlainConnection<S> {
    stream: S,
    inbox: VecDeque<(String, Vec<u8>)>,
}

impl<S: Read + Write> PlainConnection<S> {
    pub fn connect(mut stream: S, client_id: &str) -> Result<Self, ClientError> {
        Frame::new(PacketKind::Connect.byte())
            .with(tag::CLIENT_ID, client_id)
            .with(tag::AUTH_METHOD, "none")
            .write_to(&mut stream)?;
        let mut c = Self {
            stream,
            inbox: VecDeque::new(),
        };
        c.await_ack(PacketKind::ConnAck)?;
        Ok(c)
    }

    pub fn subscribe(&mut self, topic: &str) -> Result<ReasonCode, ClientError> {
        Frame::new(PacketKind::Subscribe.byte())
            .with(tag::TOPIC, topic)
            .write_to(&mut self.stream)?;
        self.await_ack(PacketKind::SubAck)
    }

    pub fn publish(&mut self, topic: &str, payload: &[u8]) -> Result<ReasonCode, ClientError> {
        Frame::new(PacketKind::Publish.byte())
            .with(tag::TOPIC, topic)
            .with(tag::PAYLOAD, payload)
            .write_to(&mut self.stream)?;
        self.await_ack(PacketKind::PubAck)
    }

    pub fn recv(&mut self) -> Result<(String, Vec<u8>), ClientError> {
        if let Some(m) = self.inbox.pop_front() {
            return Ok(m);
        }
        loop {
            let f = self.read()?;
            if let Some(m) = delivery(&f) {
                return Ok(m);
            }
        }
    }

    fn await_ack(&mut self, kind: PacketKind) -> Result<ReasonCode, ClientError> {
        loop {
            let f = self.read()?;
            if f.kind == kind.byte() {
                let code = f.field(tag::REASON_CODE).and_then(|r| r.first().copied());
                return code
                    .and_then(|c| ReasonCode::try_from(c).ok())
                    .ok_or_else(|| WireError::BadValue("reason code").into());
            }
            if let Some(m) = delivery(&f) {
                self.inbox.push_back(m);
            }
        }
    }

    fn read(&mut self) -> Result<Frame, ClientError> {
        Frame::read_from(&mut self.stream)?.ok_or(ClientError::Closed)
    }
}

fn delivery(f: &Frame) -> Option<(String, Vec<u8>)> {
    if f.kind != PacketKind::Publish.byte() {
        return None;
    }
    let topic = String::from_utf8_lossy(f.field(tag::TOPIC)?).into_owned();
    Some((topic, f.field(tag::PAYLOAD)?.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plaintext_roundtrip_over_tcp() {
        let broker = PlainBroker::listen("127.0.0.1:0").unwrap();
        let mut sub = PlainConnection::connect(TcpStream::connect(broker.local_addr()).unwrap(), "s").unwrap();
        assert_eq!(sub.subscribe("T").unwrap(), ReasonCode::Success);
        let mut publ = PlainConnection::connect(TcpStream::connect(broker.local_addr()).unwrap(), "p").unwrap();
        assert_eq!(publ.publish("T", b"hello").unwrap(), ReasonCode::Success);
        assert_eq!(sub.recv().unwrap(), ("T".to_string(), b"hello".to_vec()));
    }
}
