//! Frame format:
//! `len:u32be | msg_type:u8 | round:u32be | party:u16be | payload`,
//! where `len` counts everything after itself. A ciphertext payload is
//! `level:f64be | scale:f64be | key_tag:[u8;16] | slots:f64be*`.

use crate::engine::{CryptoContext, KeyTag, PartyId, SlotVector};
use crate::error::{Error, Result};

/// Sender id used by the server.
pub const SERVER_ID: PartyId = 0xFFFF;

const HEADER: usize = 1 + 4 + 2;
const CT_HEADER: usize = 8 + 8 + 16;
/// Refuse frames beyond 1 GiB.
pub const MAX_FRAME: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    ModelBcast = 1,
    Gradient = 2,
    BootstrapReq = 3,
    BootstrapShare = 4,
    KeyswitchReq = 5,
    KeyswitchShare = 6,
    Done = 7,
}

impl TryFrom<u8> for MsgType {
    type Error = Error;

    fn try_from(b: u8) -> Result<Self> {
        Ok(match b {
            1 => MsgType::ModelBcast,
            2 => MsgType::Gradient,
            3 => MsgType::BootstrapReq,
            4 => MsgType::BootstrapShare,
            5 => MsgType::KeyswitchReq,
            6 => MsgType::KeyswitchShare,
            7 => MsgType::Done,
            other => return Err(Error::Wire(format!("unknown message type {other}"))),
        })
    }
}

/// Serialized ciphertext.
#[derive(Clone, Debug, PartialEq)]
pub struct CtBlock {
    pub level: u32,
    pub scale: f64,
    pub key_tag: KeyTag,
    pub slots: Vec<f64>,
}

impl CtBlock {
    pub fn from_ct(ct: &SlotVector) -> Self {
        CtBlock {
            level: ct.level(),
            scale: ct.scale(),
            key_tag: ct.key_tag(),
            slots: ct.raw_slots().to_vec(),
        }
    }

    pub fn into_ct(self, ctx: &CryptoContext) -> Result<SlotVector> {
        ctx.import(self.slots, self.level, self.scale, self.key_tag)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WireMessage {
    pub msg_type: MsgType,
    pub round: u32,
    pub party: PartyId,
    pub payload: Option<CtBlock>,
}

impl WireMessage {
    pub fn new(msg_type: MsgType, round: u32, party: PartyId) -> Self {
        WireMessage {
            msg_type,
            round,
            party,
            payload: None,
        }
    }

    pub fn with_ct(mut self, ct: &SlotVector) -> Self {
        self.payload = Some(CtBlock::from_ct(ct));
        self
    }

    pub fn ct(&self, ctx: &CryptoContext) -> Result<SlotVector> {
        match &self.payload {
            Some(b) => b.clone().into_ct(ctx),
            None => Err(Error::Protocol(format!(
                "{:?} from {} carries no ciphertext",
                self.msg_type, self.party
            ))),
        }
    }

    /// Full frame including the length prefix.
    pub fn encode(&self) -> Vec<u8> {
        let body = HEADER
            + self
                .payload
                .as_ref()
                .map_or(0, |b| CT_HEADER + 8 * b.slots.len());
        let mut out = Vec::with_capacity(4 + body);
        out.extend_from_slice(&(body as u32).to_be_bytes());
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.round.to_be_bytes());
        out.extend_from_slice(&self.party.to_be_bytes());
        if let Some(b) = &self.payload {
            out.extend_from_slice(&f64::from(b.level).to_be_bytes());
            out.extend_from_slice(&b.scale.to_be_bytes());
            out.extend_from_slice(b.key_tag.as_bytes());
            for x in &b.slots {
                out.extend_from_slice(&x.to_be_bytes());
            }
        }
        out
    }

    /// Parse one complete frame (length prefix included).
    pub fn decode(frame: &[u8]) -> Result<Self> {
        if frame.len() < 4 {
            return Err(Error::Wire(format!(
                "frame of {} bytes has no length prefix",
                frame.len()
            )));
        }
        let len = u32::from_be_bytes(frame[..4].try_into().expect("4 bytes")) as usize;
        let body = &frame[4..];
        if body.len() != len {
            return Err(Error::Wire(format!(
                "length prefix says {len} bytes, frame carries {}",
                body.len()
            )));
        }
        WireMessage::decode_body(body)
    }

    /// Parse a frame body (everything after the length prefix).
    pub fn decode_body(body: &[u8]) -> Result<Self> {
        if body.len() < HEADER {
            return Err(Error::Wire(format!(
                "truncated header ({} bytes)",
                body.len()
            )));
        }
        let msg_type = MsgType::try_from(body[0])?;
        let round = u32::from_be_bytes(body[1..5].try_into().expect("4 bytes"));
        let party = u16::from_be_bytes(body[5..7].try_into().expect("2 bytes"));
        let rest = &body[HEADER..];
        let payload = if rest.is_empty() {
            None
        } else {
            if rest.len() < CT_HEADER || (rest.len() - CT_HEADER) % 8 != 0 {
                return Err(Error::Wire(format!(
                    "ciphertext block of {} bytes is malformed",
                    rest.len()
                )));
            }
            let f = |i: usize| f64::from_be_bytes(rest[i..i + 8].try_into().expect("8 bytes"));
            let level = f(0);
            if !(level >= 0.0 && level.fract() == 0.0 && level <= f64::from(u32::MAX)) {
                return Err(Error::Wire(format!("invalid level {level}")));
            }
            let mut tag = [0u8; 16];
            tag.copy_from_slice(&rest[16..32]);
            let slots = (CT_HEADER..rest.len()).step_by(8).map(f).collect();
            Some(CtBlock {
                level: level as u32,
                scale: f(8),
                key_tag: KeyTag(tag),
                slots,
            })
        };
        Ok(WireMessage {
            msg_type,
            round,
            party,
            payload,
        })
    }
}

/// Read one frame from a byte stream; `Ok(None)` on clean end of stream.
pub fn read_frame(r: &mut impl std::io::Read) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(Error::Transport(e.to_string())),
    }
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_FRAME {
        return Err(Error::Wire(format!("frame of {n} bytes exceeds limit")));
    }
    let mut frame = vec![0u8; 4 + n];
    frame[..4].copy_from_slice(&len);
    r.read_exact(&mut frame[4..])
        .map_err(|e| Error::Transport(format!("truncated frame: {e}")))?;
    Ok(Some(frame))
}
