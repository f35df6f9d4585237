//! Behavior library: scripted primitive sequences with expected replies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{Entity, EntityId, EntityKind, Grammar, GrammarError, Opc, Payload};
use crate::world::{GazeTarget, JointId, ObjectId, RobotPrimitive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    AcquireInfo,
    ExpressKnowledge,
    MoveObject,
    AskHumanMove,
    InteractVerbally,
    ShowLearned,
}

impl BehaviorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorKind::AcquireInfo => "acquire_info",
            BehaviorKind::ExpressKnowledge => "express_knowledge",
            BehaviorKind::MoveObject => "move_object",
            BehaviorKind::AskHumanMove => "ask_human_move",
            BehaviorKind::InteractVerbally => "interact_verbally",
            BehaviorKind::ShowLearned => "show_learned",
        }
    }
}

/// What a question is waiting for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "expect", rename_all = "snake_case")]
pub enum Expectation {
    ObjectLabel {
        entity: EntityId,
    },
    AgentName {
        entity: EntityId,
    },
    BodyPartName {
        entity: EntityId,
    },
    Touch {
        entity: EntityId,
        joint: JointId,
    },
    /// The partner points at whichever object carries `label`.
    PointAt {
        label: String,
    },
    /// The partner moves `object` out of `from`.
    RegionChange {
        object: ObjectId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum ScriptStep {
    Do { primitive: RobotPrimitive },
    Ask { text: String, expect: Expectation },
}

impl ScriptStep {
    pub fn act(p: RobotPrimitive) -> Self {
        ScriptStep::Do { primitive: p }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorRequest {
    pub kind: BehaviorKind,
    pub target: Option<EntityId>,
    pub script: Vec<ScriptStep>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BehaviorError {
    #[error("no present entity with missing information")]
    NothingToAcquire,
    #[error("no present, fully known entity")]
    NothingToExpress,
    #[error("entity `{0}` has nothing to acquire")]
    AlreadyKnown(EntityId),
    #[error("entity `{0}` is not fully known")]
    NotKnown(EntityId),
    #[error("entity `{0}` cannot be the target of this behavior")]
    Unsupported(EntityId),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

fn pick<R: Rng + ?Sized>(mut ids: Vec<EntityId>, rng: &mut R) -> Option<EntityId> {
    if ids.is_empty() {
        return None;
    }
    ids.sort();
    let i = rng.gen_range(0..ids.len());
    Some(ids.swap_remove(i))
}

/// An unknown partner is always asked first; otherwise a seeded uniform
/// choice among present entities with missing information.
pub fn choose_acquisition_target<R: Rng + ?Sized>(opc: &Opc, rng: &mut R) -> Result<EntityId, BehaviorError> {
    let candidates: Vec<&Entity> = opc.iter().filter(|e| e.in_scene() && e.missing_information()).collect();
    if let Some(agent) = candidates.iter().find(|e| e.kind == EntityKind::Agent) {
        return Ok(agent.id.clone());
    }
    pick(candidates.iter().map(|e| e.id.clone()).collect(), rng).ok_or(BehaviorError::NothingToAcquire)
}

/// Seeded uniform choice among present, fully known entities.
pub fn choose_expression_target<R: Rng + ?Sized>(opc: &Opc, rng: &mut R) -> Result<EntityId, BehaviorError> {
    let ids = opc
        .iter()
        .filter(|e| e.in_scene() && !e.missing_information())
        .map(|e| e.id.clone())
        .collect();
    pick(ids, rng).ok_or(BehaviorError::NothingToExpress)
}

pub fn build_acquisition_behavior(target: &Entity, grammar: &Grammar) -> Result<BehaviorRequest, BehaviorError> {
    if !target.missing_information() {
        return Err(BehaviorError::AlreadyKnown(target.id.clone()));
    }
    let entity = target.id.clone();
    let script = match &target.payload {
        Payload::Object { object, .. } => vec![
            ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Object(object.clone()))),
            ScriptStep::act(RobotPrimitive::PointAt(object.clone())),
            ScriptStep::Ask {
                text: grammar.say("tag_request", &[])?,
                expect: Expectation::ObjectLabel { entity },
            },
        ],
        Payload::Agent { .. } => vec![
            ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Human)),
            ScriptStep::Ask {
                text: grammar.say("agent_request", &[])?,
                expect: Expectation::AgentName { entity },
            },
        ],
        Payload::BodyPart { joint, .. } => match &target.label {
            None => vec![
                ScriptStep::act(RobotPrimitive::RaiseHand),
                ScriptStep::act(RobotPrimitive::MoveBodyPart(*joint)),
                ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Human)),
                ScriptStep::Ask {
                    text: grammar.say("body_part_request", &[])?,
                    expect: Expectation::BodyPartName { entity },
                },
            ],
            Some(name) => vec![
                ScriptStep::act(RobotPrimitive::MoveBodyPart(*joint)),
                ScriptStep::Ask {
                    text: grammar.say("touch_request", &[("name", name)])?,
                    expect: Expectation::Touch { entity, joint: *joint },
                },
            ],
        },
        Payload::Action { .. } => return Err(BehaviorError::Unsupported(entity)),
    };
    Ok(BehaviorRequest {
        kind: BehaviorKind::AcquireInfo,
        target: Some(target.id.clone()),
        script,
    })
}

pub fn build_expression_behavior(target: &Entity, grammar: &Grammar) -> Result<BehaviorRequest, BehaviorError> {
    if target.missing_information() {
        return Err(BehaviorError::NotKnown(target.id.clone()));
    }
    let label = target.label.as_deref().expect("known entities are labeled");
    let say = |id: &str, slot: &str| {
        grammar
            .say(id, &[(slot, label)])
            .map(|text| ScriptStep::act(RobotPrimitive::Say(text)))
    };
    let script = match &target.payload {
        Payload::Object { object, .. } => vec![
            ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Human)),
            ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Object(object.clone()))),
            ScriptStep::act(RobotPrimitive::PointAt(object.clone())),
            say("tag_reply_indefinite", "object")?,
        ],
        Payload::Agent { .. } => vec![
            ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Human)),
            say("express_agent", "name")?,
        ],
        Payload::BodyPart { joint, .. } => vec![
            ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Human)),
            ScriptStep::act(RobotPrimitive::MoveBodyPart(*joint)),
            say("express_body_part", "name")?,
        ],
        Payload::Action { .. } => return Err(BehaviorError::Unsupported(target.id.clone())),
    };
    Ok(BehaviorRequest {
        kind: BehaviorKind::ExpressKnowledge,
        target: Some(target.id.clone()),
        script,
    })
}

/// A single spoken line while looking at the partner.
pub fn verbal_behavior(kind: BehaviorKind, lines: Vec<String>) -> BehaviorRequest {
    let mut script = vec![ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Human))];
    script.extend(lines.into_iter().map(|l| ScriptStep::act(RobotPrimitive::Say(l))));
    BehaviorRequest {
        kind,
        target: None,
        script,
    }
}
