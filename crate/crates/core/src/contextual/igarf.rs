//! Initial/goal/action/result/final story graph built from episodes.

use serde::{Deserialize, Serialize};

use super::abm::{EpisodeRecord, Snapshot};
use super::goals::GoalKind;
use super::planner::StepKind;
use super::relation::{Place, Relation};
use crate::adaptive::{EntityKind, Paor};
use crate::log::{BindSlot, EventKind, Source};
use crate::reactive::BehaviorKind;
use crate::world::{Region, RobotPrimitive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Initial,
    Goal,
    Action,
    Result,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgarfNode {
    pub id: usize,
    pub kind: NodeKind,
    pub relation: Relation,
    pub success: bool,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Temporal succession of actions.
    Sequence,
    /// A want or a reasoning step leading to an action.
    Motivation,
    /// An action bringing about a result.
    Effect,
    /// A failure leading to reasoning.
    Recovery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IgarfEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Igarf {
    pub nodes: Vec<IgarfNode>,
    pub edges: Vec<IgarfEdge>,
    /// Episodes the story was built from.
    pub episodes: Vec<u64>,
}

impl Igarf {
    pub fn of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &IgarfNode> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    pub fn goal(&self) -> &IgarfNode {
        self.of_kind(NodeKind::Goal)
            .next()
            .expect("every story has a goal node")
    }

    pub fn actions(&self) -> Vec<&IgarfNode> {
        self.of_kind(NodeKind::Action).collect()
    }

    pub fn node(&self, id: usize) -> &IgarfNode {
        &self.nodes[id]
    }

    pub fn edges_into(&self, id: usize) -> impl Iterator<Item = &IgarfEdge> {
        self.edges.iter().filter(move |e| e.to == id)
    }

    pub fn edge_between(&self, from: usize, to: usize) -> Option<EdgeKind> {
        self.edges
            .iter()
            .filter(|e| e.from == from && e.to == to && e.kind != EdgeKind::Sequence)
            .map(|e| e.kind)
            .next()
            .or_else(|| self.edges.iter().find(|e| e.from == from && e.to == to).map(|e| e.kind))
    }

    fn push(&mut self, kind: NodeKind, relation: Relation, success: bool, tick: u64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(IgarfNode {
            id,
            kind,
            relation,
            success,
            tick,
        });
        id
    }

    fn link(&mut self, from: usize, to: usize, kind: EdgeKind) {
        self.edges.push(IgarfEdge { from, to, kind });
    }
}

/// Where an object is, phrased from the robot's point of view.
pub fn location_relation(label: &str, region: Region) -> Relation {
    match region {
        Region::I => Relation::new("i", "have").object(label),
        Region::H => Relation::new("you", "have").object(label),
        Region::S => Relation::new(label, "is_in").place(Place::Region(Region::S)),
    }
}

/// Relation as a PAOR frame, in the grammar's narration vocabulary.
pub fn relation_meaning(r: &Relation) -> Paor {
    match (r.verb.as_str(), &r.place) {
        ("is_in", Some(Place::Region(Region::S))) => Paor::new("is_in").agent(r.subject.clone()).object("shared"),
        _ => {
            let mut p = Paor::new(r.verb.clone()).agent(r.subject.clone());
            p.object = r.object.clone();
            p
        }
    }
}

fn label_in(snaps: &[&Snapshot], id: &str) -> Option<String> {
    snaps.iter().rev().find_map(|s| s.label_of(id).map(String::from))
}

/// Build the story for a time-ordered, non-empty run of episodes.
pub fn build_igarf(episodes: &[&EpisodeRecord]) -> Igarf {
    assert!(!episodes.is_empty(), "a story needs at least one episode");
    let first = episodes[0];
    let last = episodes[episodes.len() - 1];
    let snaps: Vec<&Snapshot> = episodes.iter().flat_map(|e| [&e.pre, &e.post]).collect();

    let target = first.target.clone();
    let label = first
        .goal
        .as_ref()
        .and_then(|g| g.target.clone())
        .filter(|_| first.goal.as_ref().is_some_and(|g| g.kind != GoalKind::NameAction))
        .or_else(|| target.as_deref().and_then(|t| label_in(&snaps, t)))
        .unwrap_or_else(|| "object".to_string());
    let object_target = target
        .as_deref()
        .and_then(|t| first.pre.entity(t).or_else(|| last.post.entity(t)))
        .filter(|e| e.kind == EntityKind::Object)
        .map(|e| e.id.clone());

    let mut g = Igarf {
        episodes: episodes.iter().map(|e| e.id).collect(),
        ..Default::default()
    };

    // -- initial -----------------------------------------------------------
    let initial_region = object_target.as_deref().and_then(|t| first.pre.region_of(t));
    let initial_rel = match initial_region {
        Some(r) => location_relation(&label, r),
        None => Relation::new("i", "know").object(label.clone()),
    };
    let initial_known = match &object_target {
        Some(_) => true,
        None => target.as_deref().and_then(|t| first.pre.label_of(t)).is_some(),
    };
    let initial_id = if object_target.is_some() || initial_known {
        Some(g.push(NodeKind::Initial, initial_rel.clone(), true, first.start_tick))
    } else {
        None
    };

    // -- goal --------------------------------------------------------------
    let goal_rel = match first.goal.as_ref().map(|g| g.kind) {
        Some(GoalKind::Take) => Relation::new("i", "want_get").object(label.clone()),
        Some(GoalKind::Give) => Relation::new("i", "want_give").object(label.clone()),
        Some(GoalKind::Point) => Relation::new("i", "want_show").object(label.clone()),
        Some(_) => Relation::new("i", "want_answer"),
        None => match first.behavior {
            BehaviorKind::AcquireInfo => Relation::new("i", "want_know").object(label.clone()),
            BehaviorKind::ExpressKnowledge => Relation::new("i", "want_tell").object(label.clone()),
            _ => Relation::new("i", "want_answer"),
        },
    };
    let goal_id = g.push(NodeKind::Goal, goal_rel, true, first.start_tick);

    // -- actions -----------------------------------------------------------
    let mut actions: Vec<usize> = Vec::new();
    let mut requested_move = false;
    let mut last_failure: Option<usize> = None;
    let mut motivated_by_reasoning: Option<usize> = None;
    let mut human_transfers: Vec<usize> = Vec::new();
    let mut robot_transfers: Vec<usize> = Vec::new();
    for ep in episodes {
        let in_plan = ep.initiator == super::Initiator::HumanOrder;
        for rec in &ep.events {
            let a = |g: &mut Igarf, rel: Relation, ok: bool| {
                g.push(NodeKind::Action, rel.at(rec.tick, rec.tick), ok, rec.tick)
            };
            let on_target = |obj: &str| object_target.as_deref() == Some(obj);
            let id = match &rec.event {
                EventKind::PrimitiveFinished { primitive, success } => match primitive {
                    RobotPrimitive::Pull(o) | RobotPrimitive::Push(o) if on_target(o) => {
                        let pull = matches!(primitive, RobotPrimitive::Pull(_));
                        let verb = match (pull, *success) {
                            (true, true) => "pull",
                            (true, false) => "fail_grasp",
                            (false, true) => "push",
                            (false, false) => "fail_push",
                        };
                        let id = a(&mut g, Relation::new("i", verb).object(label.clone()), *success);
                        if *success {
                            robot_transfers.push(id);
                        } else {
                            last_failure = Some(id);
                        }
                        Some(id)
                    }
                    RobotPrimitive::PointAt(o) if on_target(o) && *success => {
                        Some(a(&mut g, Relation::new("i", "point").object(label.clone()), true))
                    }
                    _ => None,
                },
                EventKind::PlanReplanned { .. } => {
                    let id = a(&mut g, Relation::new("i", "reason"), true);
                    if let Some(f) = last_failure.take() {
                        g.link(f, id, EdgeKind::Recovery);
                    }
                    motivated_by_reasoning = Some(id);
                    Some(id)
                }
                EventKind::PlanStepStarted { step, .. } => {
                    let verb = match step {
                        StepKind::AskPush => Some("ask_for"),
                        StepKind::AskPull => Some("ask_take"),
                        StepKind::PointToLearn => Some("ask_point"),
                        _ => None,
                    };
                    verb.map(|v| {
                        requested_move = matches!(step, StepKind::AskPush | StepKind::AskPull);
                        let id = a(&mut g, Relation::new("i", v).object(label.clone()), true);
                        if let Some(r) = motivated_by_reasoning.take() {
                            g.link(r, id, EdgeKind::Motivation);
                        }
                        id
                    })
                }
                EventKind::RobotSpoke { .. } if !in_plan && ep.behavior == BehaviorKind::AcquireInfo => {
                    let verb = if ep
                        .pre
                        .entity(target.as_deref().unwrap_or(""))
                        .is_some_and(|e| e.label.is_some())
                    {
                        "ask_touch"
                    } else {
                        "ask_name"
                    };
                    Some(a(&mut g, Relation::new("i", verb).object(label.clone()), true))
                }
                EventKind::RobotSpoke { .. } if !in_plan && ep.behavior == BehaviorKind::ExpressKnowledge => {
                    Some(a(&mut g, Relation::new("i", "tell").object(label.clone()), true))
                }
                EventKind::RobotSpoke { .. } if ep.behavior == BehaviorKind::InteractVerbally => {
                    Some(a(&mut g, Relation::new("i", "answer"), true))
                }
                EventKind::ObjectMoved { object, from, to } if rec.source == Source::Human && on_target(object) => {
                    let (verb, toward_robot) = match (from, to) {
                        (Region::H, Region::S) => ("give", true),
                        _ => ("take", false),
                    };
                    let id = a(&mut g, Relation::new("you", verb).object(label.clone()), true);
                    if requested_move {
                        g.link(goal_id, id, EdgeKind::Motivation);
                        requested_move = false;
                    }
                    if toward_robot {
                        human_transfers.push(id);
                    }
                    Some(id)
                }
                EventKind::HumanPointed { object } if on_target(object) && in_plan => {
                    Some(a(&mut g, Relation::new("you", "point").object(label.clone()), true))
                }
                EventKind::Bound {
                    slot: BindSlot::Label,
                    value,
                    ..
                } if !in_plan => Some(a(&mut g, Relation::new("you", "tell").object(value.clone()), true)),
                EventKind::Bound {
                    slot: BindSlot::Touch, ..
                } => Some(a(&mut g, Relation::new("you", "touch").object(label.clone()), true)),
                _ => None,
            };
            if let Some(id) = id {
                actions.push(id);
            }
        }
    }
    for w in actions.windows(2) {
        g.link(w[0], w[1], EdgeKind::Sequence);
    }

    // -- result and final --------------------------------------------------
    let final_region = object_target.as_deref().and_then(|t| last.post.region_of(t));
    let final_rel = match final_region {
        Some(r) => location_relation(&label, r),
        None => Relation::new("i", "know").object(label.clone()),
    };
    let changed = match (initial_region, final_region) {
        (Some(a), Some(b)) => a != b,
        _ => !initial_known && target.as_deref().and_then(|t| last.post.label_of(t)).is_some(),
    };
    if changed {
        let result = g.push(NodeKind::Result, final_rel.clone(), true, last.end_tick);
        let cause = human_transfers
            .last()
            .copied()
            .filter(|_| final_region == Some(Region::I))
            .or_else(|| robot_transfers.last().copied())
            .or_else(|| actions.last().copied());
        if let Some(c) = cause {
            g.link(c, result, EdgeKind::Effect);
        }
    }
    if changed || initial_id.is_some() {
        g.push(NodeKind::Final, final_rel, true, last.end_tick);
    }
    g
}
