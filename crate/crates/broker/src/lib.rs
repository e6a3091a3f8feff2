//! Runnable DAXiot broker.
//!
//! [`Broker`] wraps the protocol core from `daxiot-core` with connection
//! handling: a reader and a writer thread per connection, TCP or in-process
//! loopback transports, file-backed trust anchors that are re-read on every
//! handshake, and a line-delimited JSON event log.
//!
//! [`Connection`] is the matching blocking client. The [`plain`] module is
//! an unauthenticated baseline used only by the benchmark.

pub mod client;
pub mod config;
pub mod events;
pub mod plain;
pub mod server;
pub mod transport;
pub mod trust;

pub use client::{ClientError, Connection, Milestone};
pub use config::{BrokerConfig, ConfigError, LogLevel, Validated};
pub use events::{Capture, EventLog, LogEvent};
pub use server::{Broker, Listener, SessionStatus, StartError};
pub use transport::LoopbackStream;
pub use trust::FileTrust;

/// Validates `config`, binds its listen address and serves until the
/// process exits. Logs go to stderr at the configured level.
pub fn run(config: &BrokerConfig) -> Result<(), StartError> {
    let broker = Broker::from_config(config, EventLog::stderr(config.log_level))?;
    broker.listen(config.listen_address.as_str())?.join();
    Ok(())
}
