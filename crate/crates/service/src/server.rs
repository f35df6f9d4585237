//! TCP front end. One reader thread and one writer thread per connection;
//! subscriptions are forwarded onto the connection's outgoing queue.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};
use log::{debug, warn};

use crate::protocol::{ClientBody, ClientFrame, ErrorCode, ServerBody, ServerFrame, SessionId};
use crate::session::{Service, ServiceError, StreamItem};
use crate::wire::{read_raw, write_frame};

type Outgoing = (Option<SessionId>, ServerBody);

pub struct Server {
    listener: TcpListener,
    service: Arc<Service>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, service: Arc<Service>) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            service,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn service(&self) -> &Arc<Service> {
        &self.service
    }

    /// Accepts connections until the listener fails.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let service = self.service.clone();
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = serve_connection(stream, service) {
                    debug!("connection {peer:?} ended: {e}");
                }
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> JoinHandle<io::Result<()>> {
        thread::spawn(move || self.run())
    }
}

fn writer(stream: TcpStream, rx: Receiver<Outgoing>, heartbeat: std::time::Duration) {
    let mut w = BufWriter::new(stream);
    let mut seq = 0u64;
    loop {
        let (session, body) = match rx.recv_timeout(heartbeat) {
            Ok(m) => m,
            Err(RecvTimeoutError::Timeout) => (None, ServerBody::Heartbeat),
            Err(RecvTimeoutError::Disconnected) => return,
        };
        let frame = ServerFrame { session, seq, body };
        seq += 1;
        if write_frame(&mut w, &frame).is_err() {
            return;
        }
    }
}

fn forward(session: SessionId, items: Receiver<StreamItem>, out: Sender<Outgoing>) {
    for item in items {
        let body = match item {
            StreamItem::Event(record) => ServerBody::Event { record },
            StreamItem::Closed(reason) => ServerBody::Closed {
                reply_to: None,
                reason,
                trace: None,
            },
        };
        if out.send((Some(session.clone()), body)).is_err() {
            return;
        }
    }
}

fn error(reply_to: Option<u64>, e: &ServiceError) -> ServerBody {
    ServerBody::Error {
        reply_to,
        code: e.code(),
        text: e.to_string(),
    }
}

pub fn serve_connection(stream: TcpStream, service: Arc<Service>) -> io::Result<()> {
    let (out, rx) = unbounded::<Outgoing>();
    let write_half = stream.try_clone()?;
    let heartbeat = service.config().heartbeat;
    let w = thread::spawn(move || writer(write_half, rx, heartbeat));
    let mut reader = BufReader::new(stream.try_clone()?);
    let result = loop {
        let raw = match read_raw(&mut reader) {
            Ok(Some(raw)) => raw,
            Ok(None) => break Ok(()),
            Err(e) => break Err(e),
        };
        let frame: ClientFrame = match serde_json::from_slice(&raw) {
            Ok(f) => f,
            Err(e) => {
                let _ = out.send((
                    None,
                    ServerBody::Error {
                        reply_to: None,
                        code: ErrorCode::BadRequest,
                        text: e.to_string(),
                    },
                ));
                continue;
            }
        };
        if let Some(reply) = dispatch(&service, frame, &out) {
            if out.send(reply).is_err() {
                break Ok(());
            }
        }
    };
    let _ = stream.shutdown(Shutdown::Both);
    drop(out);
    let _ = w.join();
    result
}

fn dispatch(service: &Service, frame: ClientFrame, out: &Sender<Outgoing>) -> Option<Outgoing> {
    let seq = frame.seq;
    if let ClientBody::Open { config, options } = &frame.body {
        return Some(match service.open_ref(config, *options) {
            Ok(id) => (Some(id), ServerBody::Opened { reply_to: seq }),
            Err(e) => {
                warn!("open failed: {e}");
                (None, error(Some(seq), &e))
            }
        });
    }
    let Some(id) = frame.session else {
        return Some((
            None,
            ServerBody::Error {
                reply_to: Some(seq),
                code: ErrorCode::MissingSession,
                text: "this message needs a session id".into(),
            },
        ));
    };
    let result = match frame.body {
        ClientBody::Open { .. } => unreachable!("handled above"),
        ClientBody::SnapshotRequest => service.snapshot(&id).map(|s| ServerBody::Snapshot {
            reply_to: seq,
            state: Box::new(s),
        }),
        ClientBody::HumanInput { input } => service
            .submit(&id, input)
            .map(|tick| ServerBody::Ack { reply_to: seq, tick }),
        ClientBody::Control { control } => service
            .control(&id, control)
            .map(|tick| ServerBody::Ack { reply_to: seq, tick }),
        ClientBody::Subscribe { from_seq } => match service.subscribe(&id, from_seq) {
            // Ack before the forwarder starts so it precedes every event.
            Ok(items) => {
                let tick = service.snapshot(&id).map(|s| s.tick).unwrap_or(0);
                let _ = out.send((Some(id.clone()), ServerBody::Ack { reply_to: seq, tick }));
                let (o, sid) = (out.clone(), id.clone());
                thread::spawn(move || forward(sid, items, o));
                return None;
            }
            Err(e) => Err(e),
        },
        ClientBody::Close => service.close(&id).map(|c| ServerBody::Closed {
            reply_to: Some(seq),
            reason: c.reason,
            trace: Some(c.trace),
        }),
    };
    Some(match result {
        Ok(body) => (Some(id), body),
        Err(e) => (Some(id), error(Some(seq), &e)),
    })
}
