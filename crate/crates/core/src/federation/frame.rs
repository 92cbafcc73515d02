//! Wire frames: `length u32 BE | msg_type u8 | sender_id u16 BE | payload`,
//! where `length` counts every byte after itself.

use alloc::vec::Vec;

use thiserror::Error;

use super::codec::{CodecError, Reader};
use crate::metrics::Metrics;

/// Largest accepted payload, 64 MiB.
pub const MAX_PAYLOAD: usize = 64 * 1024 * 1024;
/// Bytes before the payload.
pub const FRAME_HEADER_LEN: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageType {
    Hello = 1,
    ModelUpload = 2,
    GlobalModel = 3,
    Metrics = 4,
    Shutdown = 5,
}

impl MessageType {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            1 => Self::Hello,
            2 => Self::ModelUpload,
            3 => Self::GlobalModel,
            4 => Self::Metrics,
            5 => Self::Shutdown,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FederatedMessage {
    pub msg_type: MessageType,
    pub sender_id: u16,
    pub payload: Vec<u8>,
}

impl FederatedMessage {
    pub fn new(msg_type: MessageType, sender_id: u16, payload: Vec<u8>) -> Self {
        Self { msg_type, sender_id, payload }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("payload of {0} bytes exceeds the 64 MiB cap")]
    Oversize(usize),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("stream ended inside a frame")]
    UnexpectedEof,
    #[error("length field {0} is shorter than the frame header")]
    BadLength(u32),
}

pub fn encode_frame(msg: &FederatedMessage) -> Result<Vec<u8>, FrameError> {
    if msg.payload.len() > MAX_PAYLOAD {
        return Err(FrameError::Oversize(msg.payload.len()));
    }
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + msg.payload.len());
    out.extend_from_slice(&((3 + msg.payload.len()) as u32).to_be_bytes());
    out.push(msg.msg_type as u8);
    out.extend_from_slice(&msg.sender_id.to_be_bytes());
    out.extend_from_slice(&msg.payload);
    Ok(out)
}

/// Validates a frame header and returns `(payload_len, type, sender)`.
pub fn decode_header(header: &[u8; FRAME_HEADER_LEN]) -> Result<(usize, MessageType, u16), FrameError> {
    let length = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
    if length < 3 {
        return Err(FrameError::BadLength(length));
    }
    let payload_len = length as usize - 3;
    if payload_len > MAX_PAYLOAD {
        return Err(FrameError::Oversize(payload_len));
    }
    let msg_type = MessageType::from_byte(header[4]).ok_or(FrameError::UnknownType(header[4]))?;
    let sender = u16::from_be_bytes([header[5], header[6]]);
    Ok((payload_len, msg_type, sender))
}

/// Decodes one frame from the front of `buf`, returning it with the number
/// of bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(FederatedMessage, usize), FrameError> {
    let header: &[u8; FRAME_HEADER_LEN] =
        buf.get(..FRAME_HEADER_LEN).ok_or(FrameError::UnexpectedEof)?.try_into().expect("slice has header length");
    let (payload_len, msg_type, sender_id) = decode_header(header)?;
    let end = FRAME_HEADER_LEN + payload_len;
    let payload = buf.get(FRAME_HEADER_LEN..end).ok_or(FrameError::UnexpectedEof)?.to_vec();
    Ok((FederatedMessage { msg_type, sender_id, payload }, end))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsPhase {
    /// The node's own model on its own test split.
    Local = 0,
    /// The received global ensemble on the node's test split.
    Global = 1,
}

/// Payload of a `Metrics` frame: `round u32 | phase u8 | tp fp fn tn u64`,
/// all little-endian, 37 bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricsReport {
    pub round: u32,
    pub phase: MetricsPhase,
    pub metrics: Metrics,
}

impl MetricsReport {
    pub const ENCODED_LEN: usize = 37;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::ENCODED_LEN);
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.phase as u8);
        for v in [self.metrics.tp, self.metrics.fp, self.metrics.fn_, self.metrics.tn] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let round = r.u32()?;
        let phase = match r.u8()? {
            0 => MetricsPhase::Local,
            1 => MetricsPhase::Global,
            _ => return Err(CodecError::InvalidField("metrics phase")),
        };
        let metrics = Metrics { tp: r.u64()?, fp: r.u64()?, fn_: r.u64()?, tn: r.u64()? };
        if r.remaining() != 0 {
            return Err(CodecError::TrailingBytes(r.remaining()));
        }
        Ok(Self { round, phase, metrics })
    }
}
