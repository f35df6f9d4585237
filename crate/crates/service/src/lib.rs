//! Live session host. Each session owns one engine on a dedicated thread,
//! paced in real time or as fast as possible; clients open sessions, send
//! partner inputs, take snapshots and follow the event log over a framed
//! JSON socket protocol.

pub mod client;
pub mod protocol;
pub mod server;
pub mod session;
pub mod wire;

pub use client::Client;
pub use protocol::{ClientBody, ConfigRef, Control, ErrorCode, OpenOptions, Pace, ServerBody};
pub use server::Server;
pub use session::{replay, replay_config, Closed, Service, ServiceConfig, ServiceError, StreamItem};
