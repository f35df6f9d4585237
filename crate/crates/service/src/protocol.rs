//! Message schema. Every frame is an object with a `kind` tag, a
//! per-sender monotone `seq` and, once a session exists, its `session` id.
//! See `PROTOCOL.md` for the field-by-field description.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use proact_core::config::ScriptFile;
use proact_core::engine::EngineSnapshot;
use proact_core::log::LogRecord;
use proact_core::world::HumanInput;

pub type SessionId = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame<B> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionId>,
    pub seq: u64,
    #[serde(flatten)]
    pub body: B,
}

/// Where an opened session takes its scenario from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigRef {
    Default,
    /// A TOML file readable by the service.
    Path(PathBuf),
    /// TOML text sent inline.
    Toml(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pace {
    /// One tick per `tick_length` of wall time.
    #[default]
    Realtime,
    /// As fast as the engine runs.
    Fast,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenOptions {
    pub pace: Pace,
    /// Start without ticking; advance with `control` messages.
    pub paused: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Control {
    Pause,
    Resume,
    /// Run this many ticks now, paused or not.
    Step {
        ticks: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientBody {
    Open {
        config: ConfigRef,
        #[serde(default)]
        options: OpenOptions,
    },
    SnapshotRequest,
    HumanInput {
        input: HumanInput,
    },
    /// Replay the log from `from_seq`, then follow it live.
    Subscribe {
        #[serde(default)]
        from_seq: u64,
    },
    Control {
        control: Control,
    },
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// The scenario config could not be loaded or is invalid.
    Config,
    UnknownSession,
    /// The session has been closed.
    Closed,
    /// The frame was not a valid client message.
    BadRequest,
    /// The message needs a `session` field.
    MissingSession,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloseReason {
    Requested,
    IdleTimeout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerBody {
    Opened {
        reply_to: u64,
    },
    /// Request accepted. For an input, `tick` is the first tick that sees
    /// it; otherwise the tick count at the time of the reply.
    Ack {
        reply_to: u64,
        tick: u64,
    },
    Event {
        record: LogRecord,
    },
    Snapshot {
        reply_to: u64,
        state: Box<EngineSnapshot>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reply_to: Option<u64>,
        code: ErrorCode,
        text: String,
    },
    Heartbeat,
    Closed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reply_to: Option<u64>,
        reason: CloseReason,
        /// Every input the session applied, as a replayable script.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trace: Option<ScriptFile>,
    },
}

pub type ClientFrame = Frame<ClientBody>;
pub type ServerFrame = Frame<ServerBody>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_frames_parse_from_plain_json() {
        let f: ClientFrame = serde_json::from_str(
            r#"{"kind":"human_input","session":"s1","seq":4,"input":{"type":"speak","text":"Give me the octopus."}}"#,
        )
        .unwrap();
        assert_eq!(f.session.as_deref(), Some("s1"));
        assert_eq!(f.seq, 4);
        assert!(matches!(
            f.body,
            ClientBody::HumanInput {
                input: HumanInput::Speak { .. }
            }
        ));

        let f: ClientFrame = serde_json::from_str(r#"{"kind":"open","seq":0,"config":"default"}"#).unwrap();
        assert_eq!(
            f.body,
            ClientBody::Open {
                config: ConfigRef::Default,
                options: OpenOptions::default()
            }
        );

        let f: ClientFrame =
            serde_json::from_str(r#"{"kind":"control","session":"s1","seq":1,"control":{"action":"step","ticks":3}}"#)
                .unwrap();
        assert_eq!(
            f.body,
            ClientBody::Control {
                control: Control::Step { ticks: 3 }
            }
        );
    }

    #[test]
    fn server_error_shape() {
        let f = ServerFrame {
            session: None,
            seq: 0,
            body: ServerBody::Error {
                reply_to: Some(2),
                code: ErrorCode::Config,
                text: "line 1".into(),
            },
        };
        let v: serde_json::Value = serde_json::to_value(&f).unwrap();
        assert_eq!(v["kind"], "error");
        assert_eq!(v["code"], "config");
        assert_eq!(v["reply_to"], 2);
    }
}
