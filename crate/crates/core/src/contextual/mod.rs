//! Episodic and autobiographical memory, goals, plans and narrative.

use serde::{Deserialize, Serialize};

use crate::reactive::DriveKind;

pub mod abm;
pub mod goals;
pub mod igarf;
pub mod narrative;
pub mod planner;
pub mod relation;

pub use abm::{Abm, AbmError, AbmQuery, EpisodeRecord, Snapshot, StreamSample};
pub use goals::{goal_from_meaning, Goal, GoalError, GoalKind, NarrativeQuery};
pub use igarf::{build_igarf, EdgeKind, Igarf, IgarfEdge, IgarfNode, NodeKind};
pub use narrative::{
    learn_constructions, narrate, narrate_lines, why_answer, Construction, Detail, Inventory, Learned, NarrativeLine,
    Slot,
};
pub use planner::{plan, ActionKind, PlannedAction, StepKind};
pub use relation::{Place, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityOutcome {
    Success,
    Failure,
    Interrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "by", content = "drive", rename_all = "snake_case")]
pub enum Initiator {
    RobotDrive(DriveKind),
    HumanOrder,
}
