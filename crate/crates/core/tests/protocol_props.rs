mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use daxiot_core::protocol::{BrokerCore, ClientSession, Packet, ProtocolError, ReasonCode};
use proptest::prelude::*;

const TOPICS: [&str; 4] = ["alpha", "beta", "gamma", "delta"];

/// Direction and packet of one captured message.
#[derive(Clone)]
enum Captured {
    ToBroker {
        session: Option<String>,
        packet: Packet,
    },
    ToPublisher(Packet),
    ToSubscriber(Packet),
}

struct Trace {
    broker: BrokerCore,
    publisher: ClientSession,
    subscriber: ClientSession,
    captured: Vec<Captured>,
}

fn full_trace() -> Trace {
    let world = World::new();
    let mut broker = world.broker();
    let pdev = world.device("AC_P", &[], &["alpha"]);
    let sdev = world.device("AC_S", &["alpha"], &[]);
    let mut captured = Vec::new();

    let (p, pid, ptrace) = establish(&world, &mut broker, &pdev);
    let (s, sid, strace) = establish(&world, &mut broker, &sdev);
    for (i, pkt) in ptrace.into_iter().enumerate() {
        captured.push(if i % 2 == 0 {
            Captured::ToBroker {
                session: (i > 0).then(|| pid.clone()),
                packet: pkt,
            }
        } else {
            Captured::ToPublisher(pkt)
        });
    }
    for (i, pkt) in strace.into_iter().enumerate() {
        captured.push(if i % 2 == 0 {
            Captured::ToBroker {
                session: (i > 0).then(|| sid.clone()),
                packet: pkt,
            }
        } else {
            Captured::ToSubscriber(pkt)
        });
    }
    let mut t = Trace {
        broker,
        publisher: p,
        subscriber: s,
        captured,
    };
    let sub = t.subscriber.subscribe("alpha").unwrap();
    let out = t.broker.handle(Some(&sid), &sub);
    t.subscriber
        .handle_suback(out.reply.as_ref().unwrap())
        .unwrap();
    t.captured.push(Captured::ToBroker {
        session: Some(sid.clone()),
        packet: sub,
    });
    t.captured.push(Captured::ToSubscriber(out.reply.unwrap()));

    let publ = t.publisher.publish("alpha", b"payload").unwrap();
    let out = t.broker.handle(Some(&pid), &publ);
    t.publisher
        .handle_puback(out.reply.as_ref().unwrap())
        .unwrap();
    let fwd = out.forwards[0].1.clone();
    t.subscriber.handle_publish(&fwd).unwrap();
    t.captured.push(Captured::ToBroker {
        session: Some(pid),
        packet: publ,
    });
    t.captured.push(Captured::ToPublisher(out.reply.unwrap()));
    t.captured.push(Captured::ToSubscriber(fwd));
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Every captured packet, delivered a second time, is rejected.
    #[test]
    fn exact_redelivery_is_rejected(pick in 0usize..13) {
        let mut t = full_trace();
        prop_assert_eq!(t.captured.len(), 13);
        match t.captured[pick].clone() {
            Captured::ToBroker { session, packet } => {
                let out = t.broker.handle(session.as_deref(), &packet);
                prop_assert!(out.error.is_some(), "{:?} accepted twice", packet.kind());
                prop_assert!(out.forwards.is_empty());
            }
            Captured::ToPublisher(packet) => prop_assert!(redeliver(&mut t.publisher, &packet).is_err()),
            Captured::ToSubscriber(packet) => prop_assert!(redeliver(&mut t.subscriber, &packet).is_err()),
        }
    }
}

fn redeliver(client: &mut ClientSession, packet: &Packet) -> Result<(), ProtocolError> {
    let dummy = World::new().device("X", &["x"], &[]);
    match packet {
        Packet::AuthChallenge { .. } => client
            .handle_challenge(packet, &dummy.credential, &dummy.disclosures)
            .map(drop),
        Packet::ConnAck { .. } => client.handle_connack(packet),
        Packet::SubAck { .. } => client.handle_suback(packet).map(drop),
        Packet::PubAck { .. } => client.handle_puback(packet).map(drop),
        Packet::Publish { .. } => client.handle_publish(packet).map(drop),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn wire_never_carries_plaintext() {
    let world = World::new();
    let mut broker = world.broker();
    let topic = "livingroom/thermostat/setpoint-xyzzy";
    let payload = b"temperature=21.5C;owner=plaintext-marker";
    let pdev = world.device("AC_WIRE_P", &[], &[topic]);
    let sdev = world.device("AC_WIRE_S", &[topic], &[]);
    let (mut p, pid, mut wire) = establish(&world, &mut broker, &pdev);
    let (mut s, sid, strace) = establish(&world, &mut broker, &sdev);
    wire.extend(strace);
    let sub = s.subscribe(topic).unwrap();
    wire.push(sub.clone());
    wire.push(broker.handle(Some(&sid), &sub).reply.unwrap());
    let publ = p.publish(topic, payload).unwrap();
    wire.push(publ.clone());
    let out = broker.handle(Some(&pid), &publ);
    wire.push(out.reply.unwrap());
    wire.push(out.forwards[0].1.clone());
    let bytes: Vec<u8> = wire.iter().flat_map(Packet::encode).collect();

    let mut secrets: Vec<Vec<u8>> = vec![
        topic.as_bytes().to_vec(),
        payload.to_vec(),
        pdev.did.to_string().into_bytes(),
        sdev.did.to_string().into_bytes(),
        b"AC_WIRE".to_vec(),
        b"broker2".to_vec(),
    ];
    for dev in [&pdev, &sdev] {
        secrets.extend(
            dev.credential
                .compact()
                .split('.')
                .map(|s| s.as_bytes()[..16].to_vec()),
        );
        secrets.extend(
            dev.disclosures
                .iter()
                .map(|d| d.encoded().as_bytes()[..16].to_vec()),
        );
        secrets.extend(
            dev.disclosures
                .iter()
                .map(|d| d.serialized().as_bytes().to_vec()),
        );
    }
    for secret in secrets {
        assert!(
            !bytes.windows(secret.len()).any(|w| w == secret.as_slice()),
            "wire leaks {}",
            String::from_utf8_lossy(&secret)
        );
    }
}

#[derive(Debug, Clone)]
enum Action {
    Subscribe(usize, usize),
    Publish(usize, usize),
}

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        (0usize..3, 0usize..4).prop_map(|(c, t)| Action::Subscribe(c, t)),
        (0usize..3, 0usize..4).prop_map(|(c, t)| Action::Publish(c, t)),
    ]
}

fn grant() -> impl Strategy<Value = (BTreeSet<usize>, BTreeSet<usize>)> {
    (
        prop::collection::btree_set(0usize..4, 0..4),
        prop::collection::btree_set(0usize..4, 0..4),
    )
        .prop_filter("device needs some claim", |(s, p)| {
            !(s.is_empty() && p.is_empty())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Broker decisions match a direct evaluation of the grants.
    #[test]
    fn decisions_match_reference_oracle(
        grants in prop::collection::vec(grant(), 3),
        actions in prop::collection::vec(action(), 1..25),
    ) {
        let world = World::new();
        let mut broker = world.broker();
        let mut clients = Vec::new();
        for (i, (sub, publ)) in grants.iter().enumerate() {
            let s: Vec<&str> = sub.iter().map(|t| TOPICS[*t]).collect();
            let p: Vec<&str> = publ.iter().map(|t| TOPICS[*t]).collect();
            let dev = world.device(&format!("AC_{i}"), &s, &p);
            let (c, id, _) = establish(&world, &mut broker, &dev);
            clients.push((c, id));
        }
        let mut subscribed: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (n, act) in actions.iter().enumerate() {
            match *act {
                Action::Subscribe(c, t) => {
                    let id = clients[c].1.clone();
                    let reason = subscribe(&mut broker, &mut clients[c].0, &id, TOPICS[t]);
                    let allowed = grants[c].0.contains(&t);
                    prop_assert_eq!(reason == ReasonCode::Success, allowed);
                    if allowed {
                        subscribed.entry(t).or_default().insert(c);
                    }
                }
                Action::Publish(c, t) => {
                    let payload = format!("msg-{n}");
                    let pkt = clients[c].0.publish(TOPICS[t], payload.as_bytes()).unwrap();
                    let out = broker.handle(Some(&clients[c].1.clone()), &pkt);
                    prop_assert!(out.error.is_none());
                    let allowed = grants[c].1.contains(&t);
                    let ack = clients[c].0.handle_puback(out.reply.as_ref().unwrap()).unwrap();
                    prop_assert_eq!(ack == ReasonCode::Success, allowed);
                    let expected: BTreeSet<usize> = if allowed {
                        subscribed.get(&t).cloned().unwrap_or_default()
                    } else {
                        BTreeSet::new()
                    };
                    let mut got = BTreeSet::new();
                    for (target, fwd) in &out.forwards {
                        let idx = clients.iter().position(|(_, id)| id == target).unwrap();
                        let (topic, body) = clients[idx].0.handle_publish(fwd).unwrap();
                        prop_assert_eq!(topic, TOPICS[t]);
                        prop_assert_eq!(body, payload.as_bytes());
                        got.insert(idx);
                    }
                    prop_assert_eq!(got, expected);
                }
            }
        }
    }

    /// Accepted counters per direction strictly increase, starting at the
    /// challenge value towards the broker and after the ConnAck proof back.
    #[test]
    fn counters_increase_per_direction(actions in prop::collection::vec(action(), 1..20)) {
        let world = World::new();
        let mut broker = world.broker();
        let all: Vec<&str> = TOPICS.to_vec();
        let mut clients = Vec::new();
        let mut inbound: Vec<Vec<(u128, u64)>> = Vec::new();
        let mut outbound: Vec<Vec<u64>> = vec![Vec::new(); 3];
        for i in 0..3 {
            let dev = world.device(&format!("AC_{i}"), &all, &all);
            let (c, id, trace) = establish(&world, &mut broker, &dev);
            let Packet::AuthResponse { auth_data } = &trace[2] else { unreachable!() };
            prop_assert_eq!(auth_data.nonce.counter, 0);
            inbound.push(vec![(u128::from_be_bytes(auth_data.nonce.prefix), 0)]);
            clients.push((c, id));
        }
        for act in actions {
            let (c, t) = match act { Action::Subscribe(c, t) | Action::Publish(c, t) => (c, t) };
            let id = clients[c].1.clone();
            let pkt = match act {
                Action::Subscribe(..) => clients[c].0.subscribe(TOPICS[t]).unwrap(),
                Action::Publish(..) => clients[c].0.publish(TOPICS[t], b"x").unwrap(),
            };
            match &pkt {
                Packet::Subscribe { topic } => inbound[c].push((u128::from_be_bytes(topic.nonce.prefix), topic.nonce.counter)),
                Packet::Publish { topic, payload } => {
                    inbound[c].push((u128::from_be_bytes(topic.nonce.prefix), topic.nonce.counter));
                    inbound[c].push((u128::from_be_bytes(payload.nonce.prefix), payload.nonce.counter));
                }
                _ => unreachable!(),
            }
            let out = broker.handle(Some(&id), &pkt);
            prop_assert!(out.error.is_none());
            match act {
                Action::Subscribe(..) => { clients[c].0.handle_suback(out.reply.as_ref().unwrap()).unwrap(); }
                Action::Publish(..) => { clients[c].0.handle_puback(out.reply.as_ref().unwrap()).unwrap(); }
            }
            for (target, fwd) in &out.forwards {
                let idx = clients.iter().position(|(_, id)| id == target).unwrap();
                let Packet::Publish { topic, payload } = fwd else { unreachable!() };
                outbound[idx].push(topic.nonce.counter);
                outbound[idx].push(payload.nonce.counter);
                clients[idx].0.handle_publish(fwd).unwrap();
            }
        }
        for seq in &inbound {
            prop_assert!(seq.windows(2).all(|w| w[0].0 == w[1].0 && w[1].1 == w[0].1 + 1));
        }
        for seq in &outbound {
            prop_assert!(seq.first().map_or(true, |&c| c == 1));
            prop_assert!(seq.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
