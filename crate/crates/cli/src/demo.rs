//! The publisher/subscriber walkthrough: P and S connect to B, S subscribes
//! to a topic, P publishes "hello" on it and S receives it. Every step A-J is
//! printed as it completes; a failure names the step and the error class.

use std::io::Write;
use std::net::TcpStream;
use std::time::{Duration, Instant};

use daxiot_broker::{Broker, Capture, ClientError, Connection, EventLog, LogLevel, Milestone};
use daxiot_core::protocol::{PacketKind, ProtocolError, ReasonCode};

use crate::error::CliError;
use crate::scenario::{two_broker_claims, Deployment, Device};

pub const TOPIC: &str = "t2";
pub const MESSAGE: &[u8] = b"hello";

#[derive(Debug, Clone, Copy, Default)]
pub struct DemoOptions {
    /// Revoke P's credential before it connects.
    pub revoke_first: bool,
    /// Drop the issuer from the broker's TIL before anyone connects.
    pub untrusted_issuer: bool,
}

/// Runs the walkthrough in a fresh directory whose path is printed first.
/// Artifacts are left in place for inspection.
pub fn run_demo(opts: DemoOptions, out: &mut dyn Write) -> Result<(), CliError> {
    let root = tempfile::Builder::new()
        .prefix("daxiot-demo-")
        .tempdir()
        .map_err(|source| CliError::Io {
            path: std::env::temp_dir(),
            source,
        })?
        .keep();
    line(out, format!("artifacts in {}", root.display()));
    let dep = Deployment::create(&root)?;
    let p = dep.device(
        &dep.issuer,
        "publisher",
        "AC_ID_123456789",
        &two_broker_claims(&["t1"], &[TOPIC], &[], &["t3", "t4"]),
    )?;
    let s = dep.device(
        &dep.issuer,
        "subscriber",
        "AC_ID_987654321",
        &two_broker_claims(&[TOPIC], &[], &["t3"], &[]),
    )?;
    if opts.untrusted_issuer {
        dep.til_remove(&dep.issuer.did)?;
        line(out, format!("setup: removed {} from the TIL", dep.issuer.did));
    }
    if opts.revoke_first {
        dep.revoke(&p.jti)?;
        line(out, format!("setup: revoked {}", p.jti));
    }

    let log = Capture::new();
    let broker = dep.start(EventLog::new(LogLevel::Debug, log.clone()))?;
    let listener = broker.listen("127.0.0.1:0")?;
    let addr = listener.local_addr();
    line(out, format!("broker {} listening on {addr}", dep.broker_did()));

    let fail = |out: &mut dyn Write, step: char, class: String, detail: &dyn std::fmt::Display| {
        line(out, format!("FAILED at step {step} ({class}): {detail}"));
        CliError::Step { step, class }
    };

    let mut pc = handshake(&dep, &broker, &log, &p, "P", addr, out).map_err(|(step, class, e)| fail(out, step, class, &e))?;
    let mut sc = handshake(&dep, &broker, &log, &s, "S", addr, out).map_err(|(step, class, e)| fail(out, step, class, &e))?;

    match sc.subscribe(TOPIC) {
        Ok(ReasonCode::Success) => step(out, 'I', format!("S -> B  SUBSCRIBE enc({TOPIC}); B checked A_Sub and sent SUBACK")),
        Ok(r) => return Err(fail(out, 'I', "NotAuthorized".into(), &format!("SUBACK {r:?}"))),
        Err(e) => return Err(fail(out, 'I', e.class().into(), &e)),
    }
    match pc.publish(TOPIC, MESSAGE) {
        Ok(ReasonCode::Success) => {}
        Ok(r) => return Err(fail(out, 'J', "NotAuthorized".into(), &format!("PUBACK {r:?}"))),
        Err(e) => return Err(fail(out, 'J', e.class().into(), &e)),
    }
    match sc.recv() {
        Ok((t, m)) if t == TOPIC && m == MESSAGE => step(
            out,
            'J',
            format!(
                "P -> B  PUBLISH enc({TOPIC}), enc(\"hello\"); B re-encrypted for S; S received ({t}, \"{}\")",
                String::from_utf8_lossy(&m)
            ),
        ),
        Ok((t, _)) => return Err(fail(out, 'J', "Integrity".into(), &format!("unexpected delivery on {t}"))),
        Err(e) => return Err(fail(out, 'J', e.class().into(), &e)),
    }
    let _ = pc.disconnect();
    let _ = sc.disconnect();
    listener.shutdown();
    line(out, "done: all steps A-J completed".to_string());
    Ok(())
}

type StepError = (char, String, ClientError);

/// Steps A-H for one device, printing each milestone.
fn handshake(
    dep: &Deployment,
    broker: &Broker,
    log: &Capture,
    device: &Device,
    who: &str,
    addr: std::net::SocketAddr,
    out: &mut dyn Write,
) -> Result<Connection<TcpStream>, StepError> {
    let stream = TcpStream::connect(addr).map_err(|e| ('B', "Transport".to_string(), e.into()))?;
    let mut reached = None;
    let result = Connection::establish_traced(
        stream,
        &device.key,
        dep.broker_did(),
        &dep.registry,
        &device.credential,
        &device.disclosures,
        |m| {
            reached = Some(m);
            match m {
                Milestone::EphemeralReady => {
                    step(out, 'A', format!("{who}: fresh ephemeral did:key, K_ES derived against {}", dep.broker_did()));
                }
                Milestone::ConnectSent => {
                    step(out, 'B', format!("{who} -> B  CONNECT auth_method=DAXiot, auth_data=enc(K_ES, static DID)"));
                }
                Milestone::BrokerAuthenticated => {
                    step(out, 'C', format!("B: authenticated {who}'s ephemeral DID via K_ES, decrypted its static DID"));
                    step(out, 'D', format!("B -> {who}  AUTH challenge enc(K_1PU, N_P)"));
                    step(out, 'E', format!("{who}: opened N_P with K_1PU, broker authenticated as {}", dep.broker_did()));
                }
                Milestone::ResponseSent => {
                    let n = device.disclosures.iter().filter(|d| d.is_for(dep.broker_did())).count();
                    step(
                        out,
                        'F',
                        format!("{who} -> B  AUTH response enc(K_1PU, N_P, SD-JWT + {n} of {} disclosures)", device.disclosures.len()),
                    );
                }
                Milestone::ConnAckReceived => {}
            }
        },
    );
    let conn = match result {
        Ok(c) => c,
        Err(e) => {
            let (letter, class) = classify(reached, &e, log);
            return Err((letter, class, e));
        }
    };
    let eph = conn.session().ephemeral_did().to_string();
    let grant = broker.with_core(|core| {
        core.session(&eph)
            .map(|s| s.grant().clone())
            .unwrap_or_default()
    });
    step(out, 'G', format!("B: decrypted presentation, authenticated {who} as {}", device.did));
    step(
        out,
        'H',
        format!(
            "B -> {who}  CONNACK success (session {}...); A_Pub={:?} A_Sub={:?}",
            &eph[..24],
            grant.publish_topics, grant.subscribe_topics
        ),
    );
    Ok(conn)
}

/// Maps a handshake failure to the step it happened in and its class.
/// Credential failures surface at the client only as a NotAuthorized
/// ConnAck, so their class is taken from the broker's log.
fn classify(reached: Option<Milestone>, err: &ClientError, log: &Capture) -> (char, String) {
    let class = err.class().to_string();
    match reached {
        None => ('A', class),
        Some(Milestone::EphemeralReady) => ('B', class),
        Some(Milestone::ConnectSent) => match err {
            ClientError::Protocol(ProtocolError::BrokerAuthentication) => ('E', class),
            ClientError::Protocol(ProtocolError::Credential(_)) => ('F', class),
            ClientError::Disconnected(_) | ClientError::Closed => ('C', broker_reason(log).unwrap_or(class)),
            _ => ('D', class),
        },
        Some(Milestone::BrokerAuthenticated) => ('F', class),
        Some(Milestone::ResponseSent) | Some(Milestone::ConnAckReceived) => match err {
            ClientError::Protocol(ProtocolError::Rejected {
                kind: PacketKind::ConnAck,
                ..
            }) => ('H', broker_reason(log).unwrap_or(class)),
            _ => ('G', broker_reason(log).unwrap_or(class)),
        },
    }
}

/// The most recent failure reason the broker logged. The broker logs right
/// after replying, so allow it a moment.
fn broker_reason(log: &Capture) -> Option<String> {
    let deadline = Instant::now() + Duration::from_secs(2);
    loop {
        let found = log
            .events()
            .into_iter()
            .rev()
            .find(|e| e.event == "auth_failed" || e.event == "rejected")
            .and_then(|e| e.reason);
        if found.is_some() || Instant::now() > deadline {
            return found;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
}

fn step(out: &mut dyn Write, letter: char, text: String) {
    line(out, format!("[{letter}] {text}"));
}

fn line(out: &mut dyn Write, text: String) {
    let _ = writeln!(out, "{text}");
}
