//! Blocking client for the framed protocol, used by tests and tools.

use std::io::{self, BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use proact_core::world::HumanInput;

use crate::protocol::{ClientBody, ClientFrame, ConfigRef, Control, OpenOptions, ServerBody, ServerFrame, SessionId};
use crate::wire::{read_frame, write_frame};

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    seq: u64,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            seq: 0,
        })
    }

    pub fn set_read_timeout(&self, t: Option<Duration>) -> io::Result<()> {
        self.reader.get_ref().set_read_timeout(t)
    }

    /// Sends one message and returns its sequence number.
    pub fn send(&mut self, session: Option<&str>, body: ClientBody) -> io::Result<u64> {
        let seq = self.seq;
        self.seq += 1;
        let frame = ClientFrame {
            session: session.map(str::to_string),
            seq,
            body,
        };
        write_frame(&mut self.writer, &frame)?;
        Ok(seq)
    }

    pub fn recv(&mut self) -> io::Result<ServerFrame> {
        read_frame(&mut self.reader)?.ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "server closed"))
    }

    /// Next frame that is not a heartbeat.
    pub fn recv_message(&mut self) -> io::Result<ServerFrame> {
        loop {
            let f = self.recv()?;
            if !matches!(f.body, ServerBody::Heartbeat) {
                return Ok(f);
            }
        }
    }

    /// Skips frames until the reply to `seq`; events seen on the way are
    /// handed to `on_event`.
    pub fn reply(&mut self, seq: u64, mut on_event: impl FnMut(ServerFrame)) -> io::Result<ServerFrame> {
        loop {
            let f = self.recv_message()?;
            let to = match &f.body {
                ServerBody::Opened { reply_to }
                | ServerBody::Ack { reply_to, .. }
                | ServerBody::Snapshot { reply_to, .. } => Some(*reply_to),
                ServerBody::Error { reply_to, .. } | ServerBody::Closed { reply_to, .. } => *reply_to,
                _ => None,
            };
            if to == Some(seq) {
                return Ok(f);
            }
            on_event(f);
        }
    }

    pub fn call(&mut self, session: Option<&str>, body: ClientBody) -> io::Result<ServerFrame> {
        let seq = self.send(session, body)?;
        self.reply(seq, |_| {})
    }

    /// Opens a session; the error frame is returned as `Err(Ok(frame))`.
    pub fn open(&mut self, config: ConfigRef, options: OpenOptions) -> io::Result<Result<SessionId, ServerFrame>> {
        let f = self.call(None, ClientBody::Open { config, options })?;
        Ok(match (&f.body, &f.session) {
            (ServerBody::Opened { .. }, Some(id)) => Ok(id.clone()),
            _ => Err(f),
        })
    }

    pub fn input(&mut self, session: &str, input: HumanInput) -> io::Result<ServerFrame> {
        self.call(Some(session), ClientBody::HumanInput { input })
    }

    pub fn control(&mut self, session: &str, control: Control) -> io::Result<ServerFrame> {
        self.call(Some(session), ClientBody::Control { control })
    }
}
