//! The broker runtime: one reader thread and one writer thread per
//! connection around a shared, locked [`BrokerCore`].

use std::collections::HashMap;
use std::io::Read;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::thread::{self, JoinHandle};

use daxiot_core::protocol::{BrokerCore, BrokerPhase, Outcome, Packet, PacketKind, ProtocolError, ReasonCode, WireError};
use serde::Serialize;
use thiserror::Error;

use crate::config::{BrokerConfig, ConfigError, LogLevel};
use crate::events::{Capture, EventLog};
use crate::transport::{pipe, spawn_writer, Link, LoopbackStream, Outgoing};

#[derive(Debug, Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
}

impl StartError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            StartError::Config(_) => 2,
            StartError::Bind { .. } => 3,
        }
    }
}

/// One row of [`Broker::admin_status`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionStatus {
    pub ephemeral_did: String,
    pub static_did: String,
    pub established: bool,
    pub publish_grants: usize,
    pub subscribe_grants: usize,
    /// Counter the broker expects on the next client envelope.
    pub inbound_counter: u64,
    /// Counter of the next broker-to-client envelope, once established.
    pub outbound_counter: Option<u64>,
}

/// Observer for every plaintext the broker decrypts, with the session it
/// belongs to. Runs on the connection's thread.
pub type PlaintextTap = dyn Fn(&str, &[u8]) + Send + Sync;

struct Shared {
    core: Mutex<BrokerCore>,
    links: Mutex<HashMap<String, Link>>,
    log: EventLog,
    tap: RwLock<Option<Arc<PlaintextTap>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    // A panic in one connection's handler must not wedge the others.
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// A running broker. Cheap to clone; all clones share sessions and routes.
#[derive(Clone)]
pub struct Broker {
    shared: Arc<Shared>,
}

impl Broker {
    pub fn new(core: BrokerCore, log: EventLog) -> Self {
        Self {
            shared: Arc::new(Shared {
                core: Mutex::new(core),
                links: Mutex::new(HashMap::new()),
                log,
                tap: RwLock::new(None),
            }),
        }
    }

    /// Validates `config` and builds a broker that logs to `log`.
    pub fn from_config(config: &BrokerConfig, log: EventLog) -> Result<Self, StartError> {
        let v = config.validate()?;
        Ok(Self::new(BrokerCore::new(v.identity, v.registry, v.trust), log))
    }

    pub fn set_plaintext_tap(&self, tap: impl Fn(&str, &[u8]) + Send + Sync + 'static) {
        *self.shared.tap.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(tap));
    }

    pub fn log(&self) -> &EventLog {
        &self.shared.log
    }

    /// Runs `f` with exclusive access to the protocol core.
    pub fn with_core<R>(&self, f: impl FnOnce(&mut BrokerCore) -> R) -> R {
        f(&mut lock(&self.shared.core))
    }

    /// Point-in-time view of every live session, sorted by ephemeral DID.
    pub fn admin_status(&self) -> Vec<SessionStatus> {
        let core = lock(&self.shared.core);
        let mut rows: Vec<_> = core
            .sessions()
            .map(|s| SessionStatus {
                ephemeral_did: s.ephemeral_did().to_string(),
                static_did: s.static_did().to_string(),
                established: s.phase() == BrokerPhase::Established,
                publish_grants: s.grant().publish_topics.len(),
                subscribe_grants: s.grant().subscribe_topics.len(),
                inbound_counter: s.expected_nonce().counter,
                outbound_counter: s.outbound_nonce().map(|n| n.counter),
            })
            .collect();
        rows.sort_by(|a, b| a.ephemeral_did.cmp(&b.ephemeral_did));
        rows
    }

    /// Serves one connection on background threads. `shutdown` must make
    /// `reader` return end-of-stream or an error; it runs when the broker
    /// drops the connection.
    pub fn serve<R, W>(&self, reader: R, writer: W, shutdown: impl FnOnce() + Send + 'static) -> JoinHandle<()>
    where
        R: Read + Send + 'static,
        W: std::io::Write + Send + 'static,
    {
        let link = spawn_writer(writer, shutdown);
        let shared = self.shared.clone();
        thread::spawn(move || Connection::new(shared, link).run(reader))
    }

    /// Opens an in-process connection. When `wire` is given, every byte in
    /// both directions is appended to it.
    pub fn connect_loopback(&self, wire: Option<Capture>) -> LoopbackStream {
        let (client_w, broker_r) = pipe(wire.clone());
        let (broker_w, client_r) = pipe(wire);
        let closer = client_w.closer();
        self.serve(broker_r, broker_w, closer);
        LoopbackStream::new(client_r, client_w)
    }

    /// Binds a TCP listener and accepts connections on a background thread.
    pub fn listen(&self, addr: impl ToSocketAddrs + std::fmt::Display) -> Result<Listener, StartError> {
        let shown = addr.to_string();
        let listener = TcpListener::bind(addr).map_err(|source| StartError::Bind { addr: shown, source })?;
        let local = listener.local_addr().map_err(|source| StartError::Bind {
            addr: "listener".into(),
            source,
        })?;
        let stop = Arc::new(AtomicBool::new(false));
        let broker = self.clone();
        let flag = stop.clone();
        let handle = thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                match stream {
                    Ok(s) => {
                        if let Err(e) = broker.serve_tcp(s) {
                            broker.shared.log.emit(LogLevel::Warn, None, "accept_failed", Some(&e.to_string()));
                        }
                    }
                    Err(e) => broker.shared.log.emit(LogLevel::Warn, None, "accept_failed", Some(&e.to_string())),
                }
            }
        });
        self.shared
            .log
            .emit(LogLevel::Info, None, "listening", Some(&local.to_string()));
        Ok(Listener {
            addr: local,
            stop,
            handle: Some(handle),
        })
    }

    fn serve_tcp(&self, stream: TcpStream) -> std::io::Result<()> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let closer = stream.try_clone()?;
        self.serve(reader, stream, move || {
            let _ = closer.shutdown(std::net::Shutdown::Both);
        });
        Ok(())
    }
}

impl std::fmt::Debug for Broker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Broker").finish_non_exhaustive()
    }
}

/// Handle to a TCP accept loop.
#[derive(Debug)]
pub struct Listener {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Listener {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks for as long as the accept loop runs.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }

    /// Stops accepting new connections. Established connections stay up.
    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept so it sees the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        if self.handle.is_some() {
            self.stop_accepting();
        }
    }
}

/// Reader-side state of one connection. Dropping it, including during a
/// panic unwind, evicts the session and closes the writer.
struct Connection {
    shared: Arc<Shared>,
    link: Link,
    session: Option<String>,
}

impl Connection {
    fn new(shared: Arc<Shared>, link: Link) -> Self {
        Self {
            shared,
            link,
            session: None,
        }
    }

    fn run(mut self, mut reader: impl Read) {
        loop {
            let packet = match Packet::read_from(&mut reader) {
                Ok(Some(p)) => p,
                Ok(None) => break,
                Err(WireError::Io(_)) => break,
                Err(e) => {
                    self.log(LogLevel::Warn, "wire_error", Some(&e.to_string()));
                    let _ = self.link.send(Outgoing::Frame(
                        Packet::Disconnect {
                            reason: ReasonCode::ProtocolError,
                        }
                        .to_frame(),
                    ));
                    break;
                }
            };
            let kind = packet.kind();
            let (outcome, panicked) = self.dispatch(&packet);
            if panicked {
                self.log(LogLevel::Error, "handler_panic", Some(&format!("{kind:?}")));
                break;
            }
            self.report(kind, &outcome);
            if let Some(tap) = self.shared.tap.read().unwrap_or_else(|e| e.into_inner()).clone() {
                let id = self.session.clone().unwrap_or_default();
                for plaintext in &outcome.decrypted {
                    tap(&id, plaintext);
                }
            }
            if outcome.close {
                break;
            }
        }
    }

    /// Runs the core on one packet and queues every resulting frame while
    /// still holding the core lock, so forwards reach each subscriber in
    /// counter order.
    fn dispatch(&mut self, packet: &Packet) -> (Outcome, bool) {
        let shared = self.shared.clone();
        let mut core = lock(&shared.core);
        let id = self.session.clone();
        let (mut outcome, panicked) = match catch_unwind(AssertUnwindSafe(|| core.handle(id.as_deref(), packet))) {
            Ok(o) => (o, false),
            Err(_) => {
                if let Some(id) = &id {
                    core.remove_session(id);
                }
                let o = Outcome {
                    session: id,
                    reply: Some(Packet::Disconnect {
                        reason: ReasonCode::ProtocolError,
                    }),
                    close: true,
                    ..Outcome::default()
                };
                (o, true)
            }
        };
        let mut links = lock(&shared.links);
        if self.session.is_none() && !outcome.close {
            if let Some(new) = &outcome.session {
                links.insert(new.clone(), self.link.clone());
                self.session = Some(new.clone());
            }
        }
        for (target, fwd) in &outcome.forwards {
            let delivered = links
                .get(target)
                .is_some_and(|l| l.send(Outgoing::Frame(fwd.to_frame())).is_ok());
            if !delivered {
                core.remove_session(target);
                links.remove(target);
                outcome.evicted.push(target.clone());
            }
        }
        for gone in &outcome.evicted {
            if let Some(l) = links.remove(gone) {
                let _ = l.send(Outgoing::Close);
            }
        }
        if let Some(reply) = &outcome.reply {
            let _ = self.link.send(Outgoing::Frame(reply.to_frame()));
        }
        if outcome.close {
            if let Some(id) = &outcome.session {
                links.remove(id);
            }
        }
        (outcome, panicked)
    }

    fn report(&self, kind: PacketKind, outcome: &Outcome) {
        let session = outcome.session.as_deref();
        let log = &self.shared.log;
        if let Some(e) = &outcome.error {
            let event = match e {
                ProtocolError::Credential(_) => "auth_failed",
                _ => "rejected",
            };
            log.emit(LogLevel::Warn, session, event, Some(e.class()));
            return;
        }
        match (kind, &outcome.reply) {
            (PacketKind::Connect, _) => log.emit(LogLevel::Info, session, "connect", None),
            (PacketKind::AuthResponse, _) => log.emit(LogLevel::Info, session, "authenticated", None),
            (PacketKind::Subscribe, Some(Packet::SubAck { reason })) => {
                log.emit(LogLevel::Info, session, "subscribe", Some(decision(*reason)))
            }
            (PacketKind::Publish, Some(Packet::PubAck { reason })) => {
                log.emit(LogLevel::Info, session, "publish", Some(decision(*reason)));
                if !outcome.forwards.is_empty() {
                    let n = outcome.forwards.len().to_string();
                    log.emit(LogLevel::Debug, session, "forward", Some(&n));
                }
            }
            (PacketKind::Disconnect, _) => log.emit(LogLevel::Info, session, "disconnect", None),
            _ => {}
        }
        for gone in &outcome.evicted {
            log.emit(LogLevel::Warn, Some(gone), "evicted", Some("delivery failed"));
        }
    }

    fn log(&self, level: LogLevel, event: &str, reason: Option<&str>) {
        self.shared.log.emit(level, self.session.as_deref(), event, reason);
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(id) = self.session.take() {
            let removed = lock(&self.shared.core).remove_session(&id);
            lock(&self.shared.links).remove(&id);
            if removed {
                self.shared.log.emit(LogLevel::Info, Some(&id), "closed", None);
            }
        }
        let _ = self.link.send(Outgoing::Close);
    }
}

fn decision(reason: ReasonCode) -> &'static str {
    match reason {
        ReasonCode::Success => "granted",
        _ => "denied",
    }
}
