//! `daxiot` command line: key and credential management, the broker service,
//! publish/subscribe clients, a step-by-step demo and a latency benchmark.

pub mod bench;
pub mod commands;
pub mod demo;
pub mod error;
pub mod scenario;

use std::io::Write;
use std::net::TcpStream;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use daxiot_broker::{BrokerConfig, Connection};
use daxiot_core::did::{Did, ResolverRegistry};
use daxiot_core::protocol::ReasonCode;

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "daxiot", version, about = "DID-authenticated publish/subscribe for IoT")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by the client commands.
#[derive(Debug, clap::Args)]
pub struct ClientArgs {
    /// Device seed file.
    #[arg(long)]
    pub key: PathBuf,
    /// Directory holding credential.sdjwt and disclosure-N.txt.
    #[arg(long)]
    pub credential: PathBuf,
    /// DID of the broker to authenticate.
    #[arg(long)]
    pub broker: Did,
    /// Directory of did:web documents.
    #[arg(long)]
    pub did_web_dir: PathBuf,
    /// host:port; defaults to the broker document's service endpoint.
    #[arg(long)]
    pub address: Option<String>,
    #[arg(long)]
    pub topic: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an Ed25519 seed file and print its did:key.
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the did:key of a seed file.
    DidShow {
        #[arg(long)]
        key: PathBuf,
    },
    /// Write the did:web document for a key.
    DidwebEmit {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        did: Did,
        #[arg(long)]
        dir: PathBuf,
        /// Service endpoint, e.g. tcp://127.0.0.1:1883.
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Issue an SD-JWT access credential.
    Issue {
        /// Issuer seed file.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        issuer: Did,
        #[arg(long)]
        subject: Did,
        /// JSON array of {"broker", "sub", "pub"} objects.
        #[arg(long)]
        claims: PathBuf,
        #[arg(long)]
        jti: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add a credential identifier to a revocation registry.
    Revoke {
        #[arg(long)]
        rr: PathBuf,
        #[arg(long)]
        jti: String,
    },
    /// Add an issuer to a trusted issuer list.
    TilAdd {
        #[arg(long)]
        til: PathBuf,
        #[arg(long)]
        did: Did,
    },
    /// Remove an issuer from a trusted issuer list.
    TilRemove {
        #[arg(long)]
        til: PathBuf,
        #[arg(long)]
        did: Did,
    },
    /// Run the broker service.
    Broker {
        #[arg(long)]
        config: PathBuf,
    },
    /// Connect, publish one message and disconnect.
    Publish {
        #[command(flatten)]
        client: ClientArgs,
        #[arg(long)]
        message: String,
    },
    /// Connect, subscribe and print deliveries as `topic<TAB>payload`.
    Subscribe {
        #[command(flatten)]
        client: ClientArgs,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Walk through the publisher/subscriber flow step by step.
    Demo {
        #[arg(long)]
        revoke_first: bool,
        #[arg(long)]
        untrusted_issuer: bool,
    },
    /// Measure connect and publish latency.
    Bench {
        #[arg(long, default_value_t = 1000)]
        iterations_connect: usize,
        #[arg(long, default_value_t = 10000)]
        iterations_publish: usize,
        #[arg(long, default_value = "both")]
        mode: bench::Mode,
        #[arg(long)]
        json: bool,
    },
}

fn say(out: &mut dyn Write, text: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn open(args: &ClientArgs) -> Result<Connection<TcpStream>, CliError> {
    let key = commands::read_key(&args.key)?;
    let (credential, disclosures) = commands::load_credential(&args.credential)?;
    let registry = ResolverRegistry::directory(&args.did_web_dir);
    let addr = commands::broker_address(&registry, &args.broker, args.address.as_deref())?;
    let stream = TcpStream::connect(&addr).map_err(|source| CliError::Io {
        path: addr.into(),
        source,
    })?;
    Ok(Connection::establish(
        stream,
        &key,
        &args.broker,
        &registry,
        &credential,
        &disclosures,
    )?)
}

fn refused(what: &str, code: ReasonCode) -> CliError {
    CliError::Usage(format!("broker refused {what}: {code:?}"))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Keygen { out: path } => say(out, commands::keygen(&path)?),
        Command::DidShow { key } => say(out, commands::did_show(&key)?),
        Command::DidwebEmit {
            key,
            did,
            dir,
            endpoint,
        } => say(out, commands::didweb_emit(&key, &did, &dir, endpoint.as_deref())?.display()),
        Command::Issue {
            key,
            issuer,
            subject,
            claims,
            jti,
            out: dir,
        } => {
            let issued = commands::issue_files(&key, &issuer, &subject, &claims, &jti, &dir)?;
            say(out, issued.credential.display())?;
            for d in issued.disclosures {
                say(out, d.display())?;
            }
            Ok(())
        }
        Command::Revoke { rr, jti } => commands::revoke(&rr, &jti),
        Command::TilAdd { til, did } => {
            if !commands::til_add(&til, &did)? {
                say(out, format!("{did} was already trusted"))?;
            }
            Ok(())
        }
        Command::TilRemove { til, did } => {
            if !commands::til_remove(&til, &did)? {
                say(out, format!("{did} was not listed"))?;
            }
            Ok(())
        }
        Command::Broker { config } => {
            let cfg = BrokerConfig::load(&config)?;
            Ok(daxiot_broker::run(&cfg)?)
        }
        Command::Publish { client, message } => {
            let mut c = open(&client)?;
            let code = c.publish(&client.topic, message.as_bytes())?;
            let _ = c.disconnect();
            match code {
                ReasonCode::Success => Ok(()),
                other => Err(refused("publish", other)),
            }
        }
        Command::Subscribe { client, count } => {
            let mut c = open(&client)?;
            match c.subscribe(&client.topic)? {
                ReasonCode::Success => {}
                other => return Err(refused("subscribe", other)),
            }
            for _ in 0..count {
                let (topic, payload) = c.recv()?;
                say(out, format!("{topic}\t{}", String::from_utf8_lossy(&payload)))?;
            }
            let _ = c.disconnect();
            Ok(())
        }
        Command::Demo {
            revoke_first,
            untrusted_issuer,
        } => demo::run_demo(
            demo::DemoOptions {
                revoke_first,
                untrusted_issuer,
            },
            out,
        ),
        Command::Bench {
            iterations_connect,
            iterations_publish,
            mode,
            json,
        } => {
            let report = bench::run_bench(mode, iterations_connect, iterations_publish)?;
            if json {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                say(out, text)
            } else {
                report.write_table(out).map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
            }
        }
    }
}
