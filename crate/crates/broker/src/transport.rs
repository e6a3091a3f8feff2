//! Byte transports: in-process pipes and the per-connection writer thread.

use std::io::{self, Read, Write};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread;

use daxiot_core::protocol::Frame;

use crate::events::Capture;

/// Write half of an in-process pipe. Every write is optionally mirrored to
/// a [`Capture`], which is how tests observe the bytes on the "wire".
#[derive(Debug)]
pub struct PipeWriter {
    tx: Arc<Sender<Vec<u8>>>,
    tap: Option<Capture>,
}

/// Read half of an in-process pipe. Reports end of stream once every writer
/// is gone or an empty chunk arrives.
#[derive(Debug)]
pub struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    pos: usize,
    eof: bool,
}

pub fn pipe(tap: Option<Capture>) -> (PipeWriter, PipeReader) {
    let (tx, rx) = mpsc::channel();
    (
        PipeWriter { tx: Arc::new(tx), tap },
        PipeReader {
            rx,
            buf: Vec::new(),
            pos: 0,
            eof: false,
        },
    )
}

impl PipeWriter {
    /// A handle that ends the reader's stream without closing this writer.
    /// It does not keep the pipe open on its own.
    pub(crate) fn closer(&self) -> impl FnOnce() + Send + 'static {
        let tx = Arc::downgrade(&self.tx);
        move || {
            if let Some(tx) = tx.upgrade() {
                let _ = tx.send(Vec::new());
            }
        }
    }
}

impl Write for PipeWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        if let Some(tap) = &self.tap {
            tap.append(buf);
        }
        self.tx
            .send(buf.to_vec())
            .map_err(|_| io::Error::from(io::ErrorKind::BrokenPipe))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        while self.pos == self.buf.len() {
            if self.eof {
                return Ok(0);
            }
            match self.rx.recv() {
                Ok(chunk) if chunk.is_empty() => self.eof = true,
                Ok(chunk) => {
                    self.buf = chunk;
                    self.pos = 0;
                }
                Err(_) => self.eof = true,
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

/// Client end of a loopback connection to an in-process broker.
#[derive(Debug)]
pub struct LoopbackStream {
    reader: PipeReader,
    writer: Option<PipeWriter>,
}

impl LoopbackStream {
    pub(crate) fn new(reader: PipeReader, writer: PipeWriter) -> Self {
        Self {
            reader,
            writer: Some(writer),
        }
    }

    /// Closes the client-to-broker direction, like a TCP half-close.
    pub fn close(&mut self) {
        self.writer = None;
    }
}

impl Read for LoopbackStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.reader.read(buf)
    }
}

impl Write for LoopbackStream {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match &mut self.writer {
            Some(w) => w.write(buf),
            None => Err(io::ErrorKind::BrokenPipe.into()),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

pub(crate) enum Outgoing {
    Frame(Frame),
    Close,
}

pub(crate) type Link = Sender<Outgoing>;

/// Spawns the thread that owns a connection's write half. Frames go out in
/// the order they were queued; `shutdown` runs once the queue is closed or
/// a write fails, which also unblocks the connection's reader.
pub(crate) fn spawn_writer<W>(mut writer: W, shutdown: impl FnOnce() + Send + 'static) -> Link
where
    W: Write + Send + 'static,
{
    let (tx, rx) = mpsc::channel::<Outgoing>();
    thread::spawn(move || {
        for item in rx {
            match item {
                Outgoing::Frame(frame) => {
                    if frame.write_to(&mut writer).and_then(|_| writer.flush()).is_err() {
                        break;
                    }
                }
                Outgoing::Close => break,
            }
        }
        drop(writer);
        shutdown();
    });
    tx
}
