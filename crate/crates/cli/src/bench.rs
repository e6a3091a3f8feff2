//! Connection and publish latency of DAXiot against the plaintext baseline,
//! both over loopback TCP.

use std::fmt;
use std::io::Write;
use std::net::TcpStream;
use std::str::FromStr;
use std::thread;
use std::time::Instant;

use daxiot_broker::plain::{PlainBroker, PlainConnection};
use daxiot_broker::{Connection, EventLog};
use daxiot_core::protocol::ReasonCode;
use serde::Serialize;

use crate::error::CliError;
use crate::scenario::{two_broker_claims, Deployment};

const TOPIC: &str = "bench/readings";
const PAYLOAD: &[u8] = b"23.5";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plaintext,
    Daxiot,
    Both,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plaintext" => Ok(Mode::Plaintext),
            "daxiot" => Ok(Mode::Daxiot),
            "both" => Ok(Mode::Both),
            other => Err(format!("unknown mode {other:?} (plaintext, daxiot or both)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Plaintext => "plaintext",
            Mode::Daxiot => "daxiot",
            Mode::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub samples: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
}

impl Stats {
    /// Summary of millisecond samples. The median of an even count averages
    /// the two middle values; p95 is nearest-rank.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let rank = (0.95 * n as f64).ceil() as usize;
        Some(Self {
            samples: n,
            mean_ms: sorted.iter().sum::<f64>() / n as f64,
            median_ms: median,
            p95_ms: sorted[rank.clamp(1, n) - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub mode: Mode,
    pub connect: Stats,
    pub publish: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub modes: Vec<ModeReport>,
    /// DAXiot mean over plaintext mean, when both ran.
    pub connect_ratio: Option<f64>,
    pub publish_ratio: Option<f64>,
}

impl BenchReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn write_table(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(
            out,
            "{:<10} {:<8} {:>8} {:>10} {:>10} {:>10}",
            "mode", "phase", "samples", "mean_ms", "median_ms", "p95_ms"
        )?;
        for m in &self.modes {
            for (phase, s) in [("connect", &m.connect), ("publish", &m.publish)] {
                writeln!(
                    out,
                    "{:<10} {:<8} {:>8} {:>10.4} {:>10.4} {:>10.4}",
                    m.mode.to_string(),
                    phase,
                    s.samples,
                    s.mean_ms,
                    s.median_ms,
                    s.p95_ms
                )?;
            }
        }
        if let (Some(c), Some(p)) = (self.connect_ratio, self.publish_ratio) {
            writeln!(out, "daxiot/plaintext mean ratio: connect {c:.2}x, publish {p:.2}x")?;
        }
        Ok(())
    }
}

pub fn run_bench(mode: Mode, connect_iters: usize, publish_iters: usize) -> Result<BenchReport, CliError> {
    if connect_iters == 0 || publish_iters == 0 {
        return Err(CliError::Usage("iteration counts must be at least 1".into()));
    }
    let mut modes = Vec::new();
    if matches!(mode, Mode::Plaintext | Mode::Both) {
        modes.push(plaintext(connect_iters, publish_iters)?);
    }
    if matches!(mode, Mode::Daxiot | Mode::Both) {
        modes.push(daxiot(connect_iters, publish_iters)?);
    }
    let ratio = |f: fn(&ModeReport) -> f64| {
        let p = modes.iter().find(|m| m.mode == Mode::Plaintext)?;
        let d = modes.iter().find(|m| m.mode == Mode::Daxiot)?;
        Some(f(d) / f(p))
    };
    let connect_ratio = ratio(|m| m.connect.mean_ms);
    let publish_ratio = ratio(|m| m.publish.mean_ms);
    Ok(BenchReport {
        modes,
        connect_ratio,
        publish_ratio,
    })
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn stats(samples: &[f64]) -> Stats {
    Stats::from_samples(samples).expect("at least one iteration")
}

fn expect_success(what: &str, code: ReasonCode) -> Result<(), CliError> {
    if code == ReasonCode::Success {
        Ok(())
    } else {
        Err(CliError::Usage(format!("benchmark {what} was refused: {code:?}")))
    }
}

fn tcp(addr: std::net::SocketAddr) -> Result<TcpStream, CliError> {
    let s = TcpStream::connect(addr).map_err(|source| CliError::Io {
        path: addr.to_string().into(),
        source,
    })?;
    let _ = s.set_nodelay(true);
    Ok(s)
}

fn plaintext(connect_iters: usize, publish_iters: usize) -> Result<ModeReport, CliError> {
    let broker = PlainBroker::listen("127.0.0.1:0").map_err(|source| CliError::Io {
        path: "127.0.0.1:0".into(),
        source,
    })?;
    let addr = broker.local_addr();
    let mut connect = Vec::with_capacity(connect_iters);
    for i in 0..connect_iters {
        let t = Instant::now();
        let c = PlainConnection::connect(tcp(addr)?, &format!("bench-{i}"))?;
        connect.push(ms(t));
        drop(c);
    }

    let mut sub = PlainConnection::connect(tcp(addr)?, "bench-sub")?;
    expect_success("subscribe", sub.subscribe(TOPIC)?)?;
    let drain = thread::spawn(move || (0..publish_iters).all(|_| sub.recv().is_ok()));
    let mut publ = PlainConnection::connect(tcp(addr)?, "bench-pub")?;
    let mut publish = Vec::with_capacity(publish_iters);
    for _ in 0..publish_iters {
        let t = Instant::now();
        let code = publ.publish(TOPIC, PAYLOAD)?;
        publish.push(ms(t));
        expect_success("publish", code)?;
    }
    let _ = drain.join();
    Ok(ModeReport {
        mode: Mode::Plaintext,
        connect: stats(&connect),
        publish: stats(&publish),
    })
}

fn daxiot(connect_iters: usize, publish_iters: usize) -> Result<ModeReport, CliError> {
    let dir = tempfile::tempdir().map_err(|source| CliError::Io {
        path: std::env::temp_dir(),
        source,
    })?;
    let dep = Deployment::create(dir.path())?;
    let claims = two_broker_claims(&[TOPIC], &[TOPIC], &[], &["elsewhere"]);
    let device = dep.device(&dep.issuer, "bench", "BENCH-1", &claims)?;
    let broker = dep.start(EventLog::discard())?;
    let listener = broker.listen("127.0.0.1:0")?;
    let addr = listener.local_addr();
    let establish = |stream| {
        Connection::establish(
            stream,
            &device.key,
            dep.broker_did(),
            &dep.registry,
            &device.credential,
            &device.disclosures,
        )
    };

    let mut connect = Vec::with_capacity(connect_iters);
    for _ in 0..connect_iters {
        let t = Instant::now();
        let c = establish(tcp(addr)?)?;
        connect.push(ms(t));
        let _ = c.disconnect();
    }

    let mut sub = establish(tcp(addr)?)?;
    expect_success("subscribe", sub.subscribe(TOPIC)?)?;
    let drain = thread::spawn(move || (0..publish_iters).all(|_| sub.recv().is_ok()));
    let mut publ = establish(tcp(addr)?)?;
    let mut publish = Vec::with_capacity(publish_iters);
    for _ in 0..publish_iters {
        let t = Instant::now();
        let code = publ.publish(TOPIC, PAYLOAD)?;
        publish.push(ms(t));
        expect_success("publish", code)?;
    }
    let _ = drain.join();
    listener.shutdown();
    Ok(ModeReport {
        mode: Mode::Daxiot,
        connect: stats(&connect),
        publish: stats(&publish),
    })
}
