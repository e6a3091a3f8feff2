use std::io::{self, Read, Write};

use thiserror::Error;

use crate::crypto::{AeadEnvelope, NONCE_PREFIX_LEN};
use crate::did::Did;

/// Value of the Connect `auth_method` field that selects this protocol.
pub const AUTH_METHOD: &str = "DAXiot";

/// Upper bound on `kind || fields`; larger frames are rejected unread.
pub const MAX_FRAME_LEN: usize = 1 << 20;

pub mod tag {
    pub const CLIENT_ID: u8 = 0x01;
    pub const AUTH_METHOD: u8 = 0x02;
    pub const AUTH_DATA: u8 = 0x03;
    pub const TOPIC: u8 = 0x04;
    pub const PAYLOAD: u8 = 0x05;
    pub const REASON_CODE: u8 = 0x06;
    pub const NONCE_PREFIX: u8 = 0x07;
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("truncated frame")]
    Truncated,
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("empty frame")]
    Empty,
    #[error("unknown packet kind 0x{0:02x}")]
    UnknownKind(u8),
    #[error("field 0x{tag:02x} not allowed in {kind:?}")]
    UnexpectedField { kind: PacketKind, tag: u8 },
    #[error("field 0x{0:02x} appears twice")]
    DuplicateField(u8),
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("bad value in field {0}")]
    BadValue(&'static str),
    #[error("transport: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PacketKind {
    Connect = 0x01,
    ConnAck = 0x02,
    Publish = 0x03,
    PubAck = 0x04,
    Subscribe = 0x08,
    SubAck = 0x09,
    Disconnect = 0x0E,
    AuthChallenge = 0x0F,
    AuthResponse = 0x10,
}

impl PacketKind {
    pub const ALL: [PacketKind; 9] = [
        PacketKind::Connect,
        PacketKind::ConnAck,
        PacketKind::Publish,
        PacketKind::PubAck,
        PacketKind::Subscribe,
        PacketKind::SubAck,
        PacketKind::Disconnect,
        PacketKind::AuthChallenge,
        PacketKind::AuthResponse,
    ];

    pub fn byte(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for PacketKind {
    type Error = WireError;

    fn try_from(b: u8) -> Result<Self, WireError> {
        PacketKind::ALL
            .into_iter()
            .find(|k| k.byte() == b)
            .ok_or(WireError::UnknownKind(b))
    }
}

/// Coarse reason codes. Detailed causes stay in broker logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ReasonCode {
    Success = 0x00,
    ProtocolError = 0x82,
    NotAuthorized = 0x87,
}

impl TryFrom<u8> for ReasonCode {
    type Error = WireError;

    fn try_from(b: u8) -> Result<Self, WireError> {
        match b {
            0x00 => Ok(ReasonCode::Success),
            0x82 => Ok(ReasonCode::ProtocolError),
            0x87 => Ok(ReasonCode::NotAuthorized),
            _ => Err(WireError::BadValue("reason_code")),
        }
    }
}

/// One length-prefixed frame with its raw tagged fields, before any
/// per-kind interpretation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: u8,
    pub fields: Vec<(u8, Vec<u8>)>,
}

impl Frame {
    pub fn new(kind: u8) -> Self {
        Self {
            kind,
            fields: Vec::new(),
        }
    }

    pub fn with(mut self, tag: u8, value: impl Into<Vec<u8>>) -> Self {
        self.fields.push((tag, value.into()));
        self
    }

    pub fn field(&self, tag: u8) -> Option<&[u8]> {
        self.fields
            .iter()
            .find(|(t, _)| *t == tag)
            .map(|(_, v)| v.as_slice())
    }

    pub fn encode(&self) -> Vec<u8> {
        let body_len = 1 + self.fields.iter().map(|(_, v)| 5 + v.len()).sum::<usize>();
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&(body_len as u32).to_be_bytes());
        out.push(self.kind);
        for (tag, value) in &self.fields {
            out.push(*tag);
            out.extend_from_slice(&(value.len() as u32).to_be_bytes());
            out.extend_from_slice(value);
        }
        out
    }

    /// Decodes exactly one frame; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (len_bytes, body) = bytes.split_first_chunk::<4>().ok_or(WireError::Truncated)?;
        let len = u32::from_be_bytes(*len_bytes) as usize;
        if len > MAX_FRAME_LEN {
            return Err(WireError::TooLarge(len));
        }
        if body.len() != len {
            return Err(WireError::Truncated);
        }
        Self::decode_body(body)
    }

    fn decode_body(body: &[u8]) -> Result<Self, WireError> {
        let (&kind, mut rest) = body.split_first().ok_or(WireError::Empty)?;
        let mut fields: Vec<(u8, Vec<u8>)> = Vec::new();
        while let Some((&tag, after_tag)) = rest.split_first() {
            let (len, after_len) = after_tag
                .split_first_chunk::<4>()
                .ok_or(WireError::Truncated)?;
            let len = u32::from_be_bytes(*len) as usize;
            if after_len.len() < len {
                return Err(WireError::Truncated);
            }
            if fields.iter().any(|(t, _)| *t == tag) {
                return Err(WireError::DuplicateField(tag));
            }
            fields.push((tag, after_len[..len].to_vec()));
            rest = &after_len[len..];
        }
        Ok(Self { kind, fields })
    }

    /// Reads one frame. `Ok(None)` on a clean end of stream before the
    /// length prefix.
    pub fn read_from(reader: &mut impl Read) -> Result<Option<Self>, WireError> {
        let mut len = [0u8; 4];
        let mut filled = 0;
        while filled < 4 {
            match reader.read(&mut len[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(WireError::Truncated),
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let len = u32::from_be_bytes(len) as usize;
        if len > MAX_FRAME_LEN {
            return Err(WireError::TooLarge(len));
        }
        let mut body = vec![0u8; len];
        reader.read_exact(&mut body).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => WireError::Truncated,
            _ => WireError::Io(e),
        })?;
        Self::decode_body(&body).map(Some)
    }

    pub fn write_to(&self, writer: &mut impl Write) -> io::Result<()> {
        writer.write_all(&self.encode())?;
        writer.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Connect {
        client_id: String,
        auth_method: String,
        auth_data: AeadEnvelope,
    },
    AuthChallenge {
        auth_data: AeadEnvelope,
    },
    AuthResponse {
        auth_data: AeadEnvelope,
    },
    /// On success carries the broker's outbound nonce prefix and a proof
    /// envelope over it.
    ConnAck {
        reason: ReasonCode,
        nonce_prefix: Option<[u8; NONCE_PREFIX_LEN]>,
        auth_data: Option<AeadEnvelope>,
    },
    Subscribe {
        topic: AeadEnvelope,
    },
    SubAck {
        reason: ReasonCode,
    },
    Publish {
        topic: AeadEnvelope,
        payload: AeadEnvelope,
    },
    PubAck {
        reason: ReasonCode,
    },
    Disconnect {
        reason: ReasonCode,
    },
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Connect { .. } => PacketKind::Connect,
            Packet::AuthChallenge { .. } => PacketKind::AuthChallenge,
            Packet::AuthResponse { .. } => PacketKind::AuthResponse,
            Packet::ConnAck { .. } => PacketKind::ConnAck,
            Packet::Subscribe { .. } => PacketKind::Subscribe,
            Packet::SubAck { .. } => PacketKind::SubAck,
            Packet::Publish { .. } => PacketKind::Publish,
            Packet::PubAck { .. } => PacketKind::PubAck,
            Packet::Disconnect { .. } => PacketKind::Disconnect,
        }
    }

    pub fn to_frame(&self) -> Frame {
        let frame = Frame::new(self.kind().byte());
        match self {
            Packet::Connect {
                client_id,
                auth_method,
                auth_data,
            } => frame
                .with(tag::CLIENT_ID, client_id.as_bytes())
                .with(tag::AUTH_METHOD, auth_method.as_bytes())
                .with(tag::AUTH_DATA, auth_data.to_bytes()),
            Packet::AuthChallenge { auth_data } | Packet::AuthResponse { auth_data } => {
                frame.with(tag::AUTH_DATA, auth_data.to_bytes())
            }
            Packet::ConnAck {
                reason,
                nonce_prefix,
                auth_data,
            } => {
                let mut frame = frame.with(tag::REASON_CODE, [*reason as u8]);
                if let Some(prefix) = nonce_prefix {
                    frame = frame.with(tag::NONCE_PREFIX, *prefix);
                }
                if let Some(env) = auth_data {
                    frame = frame.with(tag::AUTH_DATA, env.to_bytes());
                }
                frame
            }
            Packet::Subscribe { topic } => frame.with(tag::TOPIC, topic.to_bytes()),
            Packet::Publish { topic, payload } => frame
                .with(tag::TOPIC, topic.to_bytes())
                .with(tag::PAYLOAD, payload.to_bytes()),
            Packet::SubAck { reason }
            | Packet::PubAck { reason }
            | Packet::Disconnect { reason } => frame.with(tag::REASON_CODE, [*reason as u8]),
        }
    }

    pub fn from_frame(frame: &Frame) -> Result<Self, WireError> {
        let kind = PacketKind::try_from(frame.kind)?;
        let allowed: &[u8] = match kind {
            PacketKind::Connect => &[tag::CLIENT_ID, tag::AUTH_METHOD, tag::AUTH_DATA],
            PacketKind::AuthChallenge | PacketKind::AuthResponse => &[tag::AUTH_DATA],
            PacketKind::ConnAck => &[tag::REASON_CODE, tag::NONCE_PREFIX, tag::AUTH_DATA],
            PacketKind::Subscribe => &[tag::TOPIC],
            PacketKind::Publish => &[tag::TOPIC, tag::PAYLOAD],
            PacketKind::SubAck | PacketKind::PubAck | PacketKind::Disconnect => &[tag::REASON_CODE],
        };
        if let Some((t, _)) = frame.fields.iter().find(|(t, _)| !allowed.contains(t)) {
            return Err(WireError::UnexpectedField { kind, tag: *t });
        }

        let required =
            |t: u8, name: &'static str| frame.field(t).ok_or(WireError::MissingField(name));
        let envelope = |t: u8, name: &'static str| -> Result<AeadEnvelope, WireError> {
            AeadEnvelope::from_bytes(required(t, name)?).map_err(|_| WireError::BadValue(name))
        };
        let text = |t: u8, name: &'static str| -> Result<String, WireError> {
            String::from_utf8(required(t, name)?.to_vec()).map_err(|_| WireError::BadValue(name))
        };
        let reason = || -> Result<ReasonCode, WireError> {
            match required(tag::REASON_CODE, "reason_code")? {
                [b] => ReasonCode::try_from(*b),
                _ => Err(WireError::BadValue("reason_code")),
            }
        };

        Ok(match kind {
            PacketKind::Connect => Packet::Connect {
                client_id: text(tag::CLIENT_ID, "client_id")?,
                auth_method: text(tag::AUTH_METHOD, "auth_method")?,
                auth_data: envelope(tag::AUTH_DATA, "auth_data")?,
            },
            PacketKind::AuthChallenge => Packet::AuthChallenge {
                auth_data: envelope(tag::AUTH_DATA, "auth_data")?,
            },
            PacketKind::AuthResponse => Packet::AuthResponse {
                auth_data: envelope(tag::AUTH_DATA, "auth_data")?,
            },
            PacketKind::ConnAck => Packet::ConnAck {
                reason: reason()?,
                nonce_prefix: frame
                    .field(tag::NONCE_PREFIX)
                    .map(|p| {
                        p.try_into()
                            .map_err(|_| WireError::BadValue("nonce_prefix"))
                    })
                    .transpose()?,
                auth_data: frame
                    .field(tag::AUTH_DATA)
                    .map(|_| envelope(tag::AUTH_DATA, "auth_data"))
                    .transpose()?,
            },
            PacketKind::Subscribe => Packet::Subscribe {
                topic: envelope(tag::TOPIC, "topic")?,
            },
            PacketKind::Publish => Packet::Publish {
                topic: envelope(tag::TOPIC, "topic")?,
                payload: envelope(tag::PAYLOAD, "payload")?,
            },
            PacketKind::SubAck => Packet::SubAck { reason: reason()? },
            PacketKind::PubAck => Packet::PubAck { reason: reason()? },
            PacketKind::Disconnect => Packet::Disconnect { reason: reason()? },
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        self.to_frame().encode()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        Self::from_frame(&Frame::decode(bytes)?)
    }

    pub fn read_from(reader: &mut impl Read) -> Result<Option<Self>, WireError> {
        Frame::read_from(reader)?
            .as_ref()
            .map(Self::from_frame)
            .transpose()
    }

    pub fn write_to(&self, writer: &mut impl Write) -> io::Result<()> {
        self.to_frame().write_to(writer)
    }
}

/// Associated data for every envelope: packet kind byte, then the session's
/// ephemeral DID.
pub fn aad(kind: PacketKind, session: &Did) -> Vec<u8> {
    let id = session.to_string();
    let mut out = Vec::with_capacity(1 + id.len());
    out.push(kind.byte());
    out.extend_from_slice(id.as_bytes());
    out
}
