//! Append-only event log shared by every layer.
//!
//! Each record serializes to one JSON line of the form
//! `{"seq":..,"tick":..,"time_s":..,"source":..,"kind":..,"payload":..}`.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::adaptive::{EntityId, EntityKind, Paor};
use crate::contextual::{ActivityOutcome, Goal, Initiator, PlannedAction, StepKind};
use crate::reactive::{BehaviorKind, DriveKind};
use crate::world::{Hand, HumanInput, JointId, ObjectId, Region, RobotPrimitive, TactileId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Robot,
    Human,
    World,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindSlot {
    Label,
    Touch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveLevel {
    pub drive: DriveKind,
    pub level: f64,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    // -- perception --------------------------------------------------------
    EntityRegistered {
        entity: EntityId,
        entity_kind: EntityKind,
    },

    // -- world -------------------------------------------------------------
    ObjectMoved {
        object: ObjectId,
        from: Region,
        to: Region,
    },
    HumanSpoke {
        text: String,
    },
    RobotSpoke {
        text: String,
    },
    HumanPointed {
        object: ObjectId,
    },
    HumanTouched {
        joint: JointId,
        tactile: TactileId,
    },
    HumanActed {
        action: String,
        object: ObjectId,
        hand: Hand,
    },
    PrimitiveStarted {
        primitive: RobotPrimitive,
    },
    PrimitiveFinished {
        primitive: RobotPrimitive,
        success: bool,
    },
    RejectedInput {
        input: HumanInput,
        reason: String,
    },

    // -- reactive ----------------------------------------------------------
    DriveLevels {
        levels: Vec<DriveLevel>,
    },
    DriveTriggered {
        drive: DriveKind,
        level: f64,
    },
    BehaviorStarted {
        activity: u64,
        behavior: BehaviorKind,
        target: Option<EntityId>,
        initiator: Initiator,
    },
    BehaviorFinished {
        activity: u64,
        behavior: BehaviorKind,
        outcome: ActivityOutcome,
    },

    // -- adaptive ----------------------------------------------------------
    UtteranceParsed {
        text: String,
        template: String,
        meaning: Paor,
    },
    UtteranceUnrecognized {
        text: String,
    },
    Bound {
        entity: EntityId,
        slot: BindSlot,
        value: String,
    },
    Retagged {
        entity: EntityId,
        old: String,
        new: String,
    },
    /// Another entity took this entity's label.
    Unbound {
        entity: EntityId,
        label: String,
    },
    /// The face oracle matched a partner seen in an earlier session.
    Recognized {
        entity: EntityId,
        label: String,
    },
    ActionClassified {
        action: String,
        confidence: Option<f64>,
        object: ObjectId,
    },

    // -- contextual --------------------------------------------------------
    GoalAdopted {
        goal: Goal,
        label: Option<String>,
    },
    GoalRefused {
        text: String,
    },
    PlanStarted {
        activity: u64,
        goal: Goal,
        actions: Vec<PlannedAction>,
    },
    PlanStepStarted {
        activity: u64,
        step: StepKind,
        attempt: u32,
    },
    PlanStepFinished {
        activity: u64,
        step: StepKind,
        attempt: u32,
        success: bool,
        observed: Option<Region>,
    },
    PlanReplanned {
        activity: u64,
        from: Region,
        actions: Vec<PlannedAction>,
    },
    PlanFinished {
        activity: u64,
        outcome: ActivityOutcome,
    },
    EpisodeRecorded {
        episode: u64,
        outcome: ActivityOutcome,
    },
    TaskCompleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub tick: u64,
    pub time_s: f64,
    pub source: Source,
    #[serde(flatten)]
    pub event: EventKind,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: sequence number {found} out of order (expected {expected})")]
    Order { line: usize, expected: u64, found: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Append-only, totally ordered by `seq` (and therefore by `(tick, seq)`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, tick: u64, time_s: f64, source: Source, event: EventKind) -> u64 {
        let seq = self.records.len() as u64;
        self.records.push(LogRecord {
            seq,
            tick,
            time_s,
            source,
            event,
        });
        seq
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn since(&self, seq: u64) -> &[LogRecord] {
        let start = (seq as usize).min(self.records.len());
        &self.records[start..]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parse a line-delimited log, checking that sequence numbers are dense
    /// and increasing.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, LogError> {
        let mut log = EventLog::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(&line).map_err(|e| LogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let expected = log.records.len() as u64;
            if rec.seq != expected {
                return Err(LogError::Order {
                    line: i + 1,
                    expected,
                    found: rec.seq,
                });
            }
            log.records.push(rec);
        }
        Ok(log)
    }

    pub fn from_jsonl(s: &str) -> Result<Self, LogError> {
        Self::read_jsonl(s.as_bytes())
    }
}

impl From<Vec<LogRecord>> for EventLog {
    fn from(records: Vec<LogRecord>) -> Self {
        Self { records }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_shape_is_flat() {
        let mut log = EventLog::new();
        log.append(
            3,
            0.3,
            Source::Human,
            EventKind::HumanSpoke {
                text: "This is the cube".into(),
            },
        );
        log.append(4, 0.4, Source::World, EventKind::TaskCompleted);
        let text = log.to_jsonl();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["kind"], "human_spoke");
        assert_eq!(first["payload"]["text"], "This is the cube");
        assert_eq!(first["source"], "human");
        assert_eq!(first["tick"], 3);
        assert_eq!(EventLog::from_jsonl(&text).unwrap(), log);
    }

    #[test]
    fn malformed_line_is_reported_with_its_number() {
        let err = EventLog::from_jsonl(
            "{\"seq\":0,\"tick\":0,\"time_s\":0.0,\"source\":\"world\",\"kind\":\"task_completed\"}\nnot json\n",
        )
        .unwrap_err();
        assert!(matches!(err, LogError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn out_of_order_sequence_is_rejected() {
        let line = "{\"seq\":5,\"tick\":0,\"time_s\":0.0,\"source\":\"world\",\"kind\":\"task_completed\"}\n";
        assert!(matches!(EventLog::from_jsonl(line), Err(LogError::Order { .. })));
    }
}
