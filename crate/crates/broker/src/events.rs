//! Line-delimited JSON event log.
//!
//! Each line is `{"ts":..,"session":..,"event":..,"reason":..}`. Fine-grained
//! failure causes go here only; the wire carries coarse reason codes.

use std::io::{self, Write};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::LogLevel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    /// Seconds since the Unix epoch.
    pub ts: f64,
    pub session: Option<String>,
    pub event: String,
    pub reason: Option<String>,
}

pub struct EventLog {
    level: LogLevel,
    sink: Mutex<Box<dyn Write + Send>>,
}

impl EventLog {
    pub fn new(level: LogLevel, sink: impl Write + Send + 'static) -> Self {
        Self {
            level,
            sink: Mutex::new(Box::new(sink)),
        }
    }

    pub fn stderr(level: LogLevel) -> Self {
        Self::new(level, io::stderr())
    }

    pub fn discard() -> Self {
        Self::new(LogLevel::Error, io::sink())
    }

    pub fn level(&self) -> LogLevel {
        self.level
    }

    pub fn emit(&self, level: LogLevel, session: Option<&str>, event: &str, reason: Option<&str>) {
        if level > self.level {
            return;
        }
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or_default();
        let line = serde_json::json!({ "ts": ts, "session": session, "event": event, "reason": reason });
        let mut sink = self.sink.lock().unwrap_or_else(|e| e.into_inner());
        // A broken log sink must not take the broker down.
        let _ = writeln!(sink, "{line}").and_then(|_| sink.flush());
    }
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog").field("level", &self.level).finish_non_exhaustive()
    }
}

/// Shared in-memory byte buffer usable as a log sink or wire recorder.
#[derive(Debug, Clone, Default)]
pub struct Capture(Arc<Mutex<Vec<u8>>>);

impl Capture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&self) -> Vec<u8> {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn contains(&self, needle: &[u8]) -> bool {
        !needle.is_empty() && self.bytes().windows(needle.len()).any(|w| w == needle)
    }

    /// Parses the buffer as an event log; malformed lines are skipped.
    pub fn events(&self) -> Vec<LogEvent> {
        String::from_utf8_lossy(&self.bytes())
            .lines()
            .filter_map(|l| serde_json::from_str(l).ok())
            .collect()
    }

    pub(crate) fn append(&self, data: &[u8]) {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).extend_from_slice(data);
    }
}

impl Write for Capture {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.append(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}
