//! Byte-level links between the server and the parties. Both transports
//! move the same encoded frames, so their byte counts agree.

use std::cell::Cell;
use std::fmt;
use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::str::FromStr;
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::wire::{read_frame, WireMessage};
use crate::engine::PartyId;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    InProcess,
    Tcp,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportKind::InProcess => "in_process",
            TransportKind::Tcp => "tcp",
        })
    }
}

impl FromStr for TransportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in_process" | "in-process" => Ok(TransportKind::InProcess),
            "tcp" => Ok(TransportKind::Tcp),
            other => Err(Error::Config(format!(
                "unknown transport {other:?} (expected in_process or tcp)"
            ))),
        }
    }
}

pub trait ServerLink {
    fn send(&self, to: PartyId, msg: &WireMessage) -> Result<()>;
    /// Next frame from any party, or `None` after `timeout` of silence.
    fn recv(&self, timeout: Duration) -> Result<Option<WireMessage>>;
    /// (bytes sent, bytes received) so far, length prefixes included.
    fn bytes(&self) -> (u64, u64);
}

pub trait PartyLink {
    fn send(&self, msg: &WireMessage) -> Result<()>;
    fn recv(&self) -> Result<WireMessage>;
}

type Inbound = (PartyId, Result<Vec<u8>>);

/// Server end shared by both transports: one inbound queue fed by every
/// party, one outbound writer per party.
pub struct Hub<W> {
    outbound: Vec<W>,
    inbound: Receiver<Inbound>,
    tx: Cell<u64>,
    rx: Cell<u64>,
}

pub trait FrameSink {
    fn put(&self, frame: Vec<u8>) -> Result<()>;
}

impl FrameSink for Sender<Vec<u8>> {
    fn put(&self, frame: Vec<u8>) -> Result<()> {
        self.send(frame)
            .map_err(|_| Error::Transport("party channel closed".into()))
    }
}

impl FrameSink for TcpStream {
    fn put(&self, frame: Vec<u8>) -> Result<()> {
        (&*self)
            .write_all(&frame)
            .map_err(|e| Error::Transport(e.to_string()))
    }
}

impl<W: FrameSink> ServerLink for Hub<W> {
    fn send(&self, to: PartyId, msg: &WireMessage) -> Result<()> {
        let sink = self
            .outbound
            .get(usize::from(to))
            .ok_or(Error::UnknownParty(to))?;
        let frame = msg.encode();
        self.tx.set(self.tx.get() + frame.len() as u64);
        sink.put(frame)
    }

    fn recv(&self, timeout: Duration) -> Result<Option<WireMessage>> {
        let (from, frame) = match self.inbound.recv_timeout(timeout) {
            Ok(x) => x,
            Err(RecvTimeoutError::Timeout) => return Ok(None),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(Error::Transport("all parties disconnected".into()))
            }
        };
        let frame = frame?;
        self.rx.set(self.rx.get() + frame.len() as u64);
        let msg = WireMessage::decode(&frame)?;
        if msg.party != from {
            return Err(Error::Protocol(format!(
                "connection of party {from} sent a frame claiming party {}",
                msg.party
            )));
        }
        Ok(Some(msg))
    }

    fn bytes(&self) -> (u64, u64) {
        (self.tx.get(), self.rx.get())
    }
}

pub struct ChannelParty {
    id: PartyId,
    to_server: Sender<Inbound>,
    inbox: Receiver<Vec<u8>>,
}

impl PartyLink for ChannelParty {
    fn send(&self, msg: &WireMessage) -> Result<()> {
        self.to_server
            .send((self.id, Ok(msg.encode())))
            .map_err(|_| Error::Transport("server channel closed".into()))
    }

    fn recv(&self) -> Result<WireMessage> {
        let frame = self
            .inbox
            .recv()
            .map_err(|_| Error::Transport("server channel closed".into()))?;
        WireMessage::decode(&frame)
    }
}

/// Channel-backed links for `parties` participants.
pub fn in_process(parties: u16) -> (Hub<Sender<Vec<u8>>>, Vec<ChannelParty>) {
    let (to_server, inbound) = channel();
    let mut outbound = Vec::new();
    let mut ends = Vec::new();
    for id in 0..parties {
        let (tx, inbox) = channel();
        outbound.push(tx);
        ends.push(ChannelParty {
            id,
            to_server: to_server.clone(),
            inbox,
        });
    }
    (
        Hub {
            outbound,
            inbound,
            tx: Cell::new(0),
            rx: Cell::new(0),
        },
        ends,
    )
}

pub struct TcpParty {
    stream: TcpStream,
}

impl TcpParty {
    pub fn connect(addr: std::net::SocketAddr) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(|e| Error::Transport(e.to_string()))?;
        stream
            .set_nodelay(true)
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(TcpParty { stream })
    }
}

impl PartyLink for TcpParty {
    fn send(&self, msg: &WireMessage) -> Result<()> {
        self.stream.put(msg.encode())
    }

    fn recv(&self) -> Result<WireMessage> {
        match read_frame(&mut &self.stream)? {
            Some(frame) => WireMessage::decode(&frame),
            None => Err(Error::Transport("server closed the connection".into())),
        }
    }
}

/// Listening side of the TCP transport. Party ids follow accept order.
pub struct TcpAcceptor {
    listener: TcpListener,
    outbound: Vec<TcpStream>,
    to_hub: Sender<Inbound>,
    inbound: Receiver<Inbound>,
}

impl TcpAcceptor {
    pub fn bind() -> Result<Self> {
        let listener =
            TcpListener::bind("127.0.0.1:0").map_err(|e| Error::Transport(e.to_string()))?;
        let (to_hub, inbound) = channel();
        Ok(TcpAcceptor {
            listener,
            outbound: Vec::new(),
            to_hub,
            inbound,
        })
    }

    pub fn addr(&self) -> Result<std::net::SocketAddr> {
        self.listener
            .local_addr()
            .map_err(|e| Error::Transport(e.to_string()))
    }

    /// Accept the next connection as party `outbound.len()` and start its
    /// reader thread.
    pub fn accept(&mut self) -> Result<PartyId> {
        let id = PartyId::try_from(self.outbound.len())
            .map_err(|_| Error::Transport("too many connections".into()))?;
        let (stream, _) = self
            .listener
            .accept()
            .map_err(|e| Error::Transport(e.to_string()))?;
        stream
            .set_nodelay(true)
            .map_err(|e| Error::Transport(e.to_string()))?;
        let mut reader = stream
            .try_clone()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let tx = self.to_hub.clone();
        std::thread::spawn(move || loop {
            match read_frame(&mut reader) {
                Ok(Some(frame)) => {
                    if tx.send((id, Ok(frame))).is_err() {
                        break;
                    }
                }
                Ok(None) => {
                    let _ = tx.send((
                        id,
                        Err(Error::Transport(format!("party {id} disconnected"))),
                    ));
                    break;
                }
                Err(e) => {
                    let _ = tx.send((id, Err(e)));
                    break;
                }
            }
        });
        self.outbound.push(stream);
        Ok(id)
    }

    pub fn into_hub(self) -> Hub<TcpStream> {
        Hub {
            outbound: self.outbound,
            inbound: self.inbound,
            tx: Cell::new(0),
            rx: Cell::new(0),
        }
    }
}
