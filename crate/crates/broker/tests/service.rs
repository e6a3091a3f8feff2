mod common;

use std::io::Write;
use std::net::TcpStream;
use std::sync::{Arc, Mutex};

use common::*;
use daxiot_broker::{Broker, BrokerConfig, ClientError, EventLog, StartError};
use daxiot_core::credential::{RevocationRegistry, TrustedIssuerList};
use daxiot_core::crypto::generate_signing_keypair;
use daxiot_core::protocol::{PacketKind, ProtocolError, ReasonCode};

fn rejected_not_authorized(r: Result<impl std::fmt::Debug, ClientError>) -> bool {
    matches!(
        r,
        Err(ClientError::Protocol(ProtocolError::Rejected {
            kind: PacketKind::ConnAck,
            reason: ReasonCode::NotAuthorized
        }))
    )
}

#[test]
fn happy_path_over_loopback_and_tcp() {
    let site = Site::new();
    let (broker, _) = site.broker();
    let listener = broker.listen("127.0.0.1:0").unwrap();

    let s = site.device("S1", &["t1"], &[]);
    let p = site.device("P1", &[], &["t1"]);
    let mut sub = site
        .connect_on(TcpStream::connect(listener.local_addr()).unwrap(), &s)
        .unwrap();
    assert_eq!(sub.subscribe("t1").unwrap(), ReasonCode::Success);
    let mut publ = site.connect(&broker, &p).unwrap();
    assert_eq!(publ.publish("t1", b"hello").unwrap(), ReasonCode::Success);
    assert_eq!(publ.publish("t2", b"nope").unwrap(), ReasonCode::NotAuthorized);
    assert_eq!(sub.recv().unwrap(), ("t1".to_string(), b"hello".to_vec()));
    listener.shutdown();
}

#[test]
fn startup_refuses_mismatched_key_and_busy_port() {
    let site = Site::new();
    generate_signing_keypair(None)
        .unwrap()
        .write_seed_file(&site.config.signing_key_path)
        .unwrap();
    let err = Broker::from_config(&site.config, EventLog::discard()).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");

    let site = Site::new();
    let mut cfg = site.config.clone();
    cfg.rr_path = site.dir.path().join("missing-rr.json");
    assert_eq!(Broker::from_config(&cfg, EventLog::discard()).unwrap_err().exit_code(), 2);

    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let (broker, _) = site.broker();
    let err = broker.listen(busy.local_addr().unwrap().to_string()).unwrap_err();
    assert!(matches!(err, StartError::Bind { .. }));
    assert_eq!(err.exit_code(), 3);

    let loaded = BrokerConfig::load(&site.config_path).unwrap();
    assert_eq!(loaded, site.config);
}

#[test]
fn trust_edits_apply_without_restart() {
    let site = Site::new();
    let (broker, log) = site.broker();
    let first = site.device("HOT-1", &["t1"], &[]);
    site.connect(&broker, &first).unwrap().disconnect().unwrap();

    // Revocation is enforced on the next connect.
    let mut rr = RevocationRegistry::load(site.rr_path()).unwrap();
    rr.revoke("HOT-1");
    rr.save(site.rr_path()).unwrap();
    assert!(rejected_not_authorized(site.connect(&broker, &first)));
    assert!(eventually(|| last_reason(&log, "auth_failed").as_deref() == Some("Revoked")));

    // Dropping the issuer from the TIL rejects its other devices.
    let second = site.device("HOT-2", &["t1"], &[]);
    site.connect(&broker, &second).unwrap();
    TrustedIssuerList::new().save(site.til_path()).unwrap();
    assert!(rejected_not_authorized(site.connect(&broker, &second)));
    assert!(eventually(|| last_reason(&log, "auth_failed").as_deref() == Some("UntrustedIssuer")));

    // A newly trusted issuer's device gets in.
    let newcomer = Site::new_issuer(&site.docs, "issuer-new.com");
    let device = site.device_of(&newcomer, "NEW-1", &[], &["t7"]);
    assert!(rejected_not_authorized(site.connect(&broker, &device)));
    let mut til = TrustedIssuerList::load(site.til_path()).unwrap();
    til.add(newcomer.did.clone());
    til.save(site.til_path()).unwrap();
    let mut c = site.connect(&broker, &device).unwrap();
    assert_eq!(c.publish("t7", b"x").unwrap(), ReasonCode::Success);
}

#[test]
fn unreadable_revocation_registry_fails_closed() {
    let site = Site::new();
    let (broker, log) = site.broker();
    std::fs::remove_file(site.rr_path()).unwrap();
    let d = site.device("RR-GONE", &["t1"], &[]);
    assert!(rejected_not_authorized(site.connect(&broker, &d)));
    assert!(eventually(|| last_reason(&log, "auth_failed").as_deref() == Some("Registry")));
}

#[test]
fn admin_status_tracks_sessions() {
    let site = Site::new();
    let (broker, _) = site.broker();
    assert!(broker.admin_status().is_empty());

    let p = site.device("ADM", &["a"], &["b", "c"]);
    let mut c = site.connect(&broker, &p).unwrap();
    let rows = broker.admin_status();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert!(row.established);
    assert_eq!(row.ephemeral_did, c.session().ephemeral_did().to_string());
    assert_eq!(row.static_did, p.did.to_string());
    assert_eq!((row.publish_grants, row.subscribe_grants), (2, 1));
    assert_eq!(row.inbound_counter, 1);
    assert_eq!(row.outbound_counter, Some(1));

    c.publish("b", b"x").unwrap();
    assert_eq!(broker.admin_status()[0].inbound_counter, 3);
    c.disconnect().unwrap();
    assert!(eventually(|| broker.admin_status().is_empty()));
}

#[test]
fn transport_close_evicts_and_unsubscribes() {
    let site = Site::new();
    let (broker, log) = site.broker();
    let s = site.device("EV", &["t1"], &[]);
    let mut sub = site.connect(&broker, &s).unwrap();
    sub.subscribe("t1").unwrap();
    let mut stream = sub.into_stream();
    stream.close();
    assert!(eventually(|| broker.admin_status().is_empty()));
    assert!(broker.with_core(|c| c.topics().subscribers("t1").is_empty()));
    assert!(eventually(|| log.events().iter().any(|e| e.event == "closed")));
}

#[test]
fn one_failing_session_leaves_others_intact() {
    let site = Site::new();
    let (broker, log) = site.broker();
    broker.set_plaintext_tap(|_, pt| {
        if pt == b"boom" {
            panic!("injected fault");
        }
    });
    let s = site.device("FI-S", &["t1"], &[]);
    let good = site.device("FI-P", &[], &["t1"]);
    let bad = site.device("FI-X", &[], &["t1"]);
    let mut sub = site.connect(&broker, &s).unwrap();
    sub.subscribe("t1").unwrap();
    let mut p = site.connect(&broker, &good).unwrap();
    let mut x = site.connect(&broker, &bad).unwrap();
    p.publish("t1", b"one").unwrap();
    let survivors = |rows: Vec<daxiot_broker::SessionStatus>| -> Vec<_> {
        rows.into_iter().filter(|r| r.static_did != bad.did.to_string()).collect()
    };
    let before = survivors(broker.admin_status());

    // The faulting handler dies after queuing its ack and the forward.
    let _ = x.publish("t1", b"boom");
    let bad_eph = x.session().ephemeral_did().to_string();
    assert!(eventually(|| broker.admin_status().iter().all(|r| r.ephemeral_did != bad_eph)));
    assert!(x.publish("t1", b"again").is_err());
    assert_eq!(sub.recv().unwrap().1, b"one");
    assert_eq!(sub.recv().unwrap().1, b"boom");

    // Survivors' counters moved only by the one forward they received.
    let after = broker.admin_status();
    assert_eq!(after.len(), 2);
    for (b, a) in before.iter().zip(&after) {
        assert_eq!(b.inbound_counter, a.inbound_counter);
        let expected = if b.static_did == s.did.to_string() { 2 } else { 0 };
        assert_eq!(a.outbound_counter.unwrap() - b.outbound_counter.unwrap(), expected);
    }
    p.publish("t1", b"two").unwrap();
    assert_eq!(sub.recv().unwrap().1, b"two");

    // A garbage frame on a fresh connection only hurts that connection.
    let mut raw = broker.connect_loopback(None);
    raw.write_all(&[0, 0, 0, 1, 0x77]).unwrap();
    assert!(eventually(|| log.events().iter().any(|e| e.event == "wire_error")));
    p.publish("t1", b"three").unwrap();
    assert_eq!(sub.recv().unwrap().1, b"three");
}

#[test]
fn broker_visible_plaintext_and_wire_stay_clean() {
    let site = Site::new();
    let (broker, log) = site.broker();
    let seen = Arc::new(Mutex::new(Vec::<u8>::new()));
    let sink = seen.clone();
    broker.set_plaintext_tap(move |_, pt| sink.lock().unwrap().extend_from_slice(pt));
    let wire = daxiot_broker::Capture::new();

    let s = site.device("PRIV-S", &["room-temperature-topic"], &[]);
    let p = site.device("PRIV-P", &[], &["room-temperature-topic"]);
    let mut sub = site.connect_on(broker.connect_loopback(Some(wire.clone())), &s).unwrap();
    sub.subscribe("room-temperature-topic").unwrap();
    let mut publ = site.connect_on(broker.connect_loopback(Some(wire.clone())), &p).unwrap();
    publ.publish("room-temperature-topic", b"payload-21.5-celsius").unwrap();
    assert_eq!(sub.recv().unwrap().1, b"payload-21.5-celsius");

    let mut broker_view = seen.lock().unwrap().clone();
    broker_view.extend(log.bytes());
    let contains = |hay: &[u8], needle: &str| hay.windows(needle.len()).any(|w| w == needle.as_bytes());
    for secret in SECRET_TOPICS.iter().chain(&[BROKER2]) {
        assert!(!contains(&broker_view, secret), "broker saw {secret}");
    }
    assert!(contains(&broker_view, "room-temperature-topic"));

    for plain in [
        "room-temperature-topic",
        "payload-21.5-celsius",
        &s.did.to_string(),
        &p.did.to_string(),
        BROKER2,
        SECRET_TOPICS[0],
    ] {
        assert!(!wire.contains(plain.as_bytes()), "wire carried {plain}");
    }
    let compact = p.credential.compact();
    for chunk in compact.as_bytes().chunks_exact(16) {
        assert!(!wire.contains(chunk), "wire carried {:?}", String::from_utf8_lossy(chunk));
    }
}
