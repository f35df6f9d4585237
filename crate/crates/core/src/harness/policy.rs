//! Scripted human partners.
//!
//! A policy sees the records produced by each tick and the world ground
//! truth, and returns the inputs to submit for the next tick. Every policy
//! here is deterministic.

use std::collections::VecDeque;

use crate::adaptive::Grammar;
use crate::config::{Config, PolicyKind, ScriptEntry};
use crate::log::{EventKind, LogRecord};
use crate::world::{GazeTarget, HumanInput, JointId, Region, RobotPrimitive, WorldState};

/// What a policy may look at besides the fresh records.
#[derive(Debug, Clone, Copy)]
pub struct PolicyView<'a> {
    pub tick: u64,
    pub tick_length: f64,
    pub world: &'a WorldState,
    pub robot_idle: bool,
    pub idle_since: u64,
    pub pending_goals: bool,
    pub task_completed: bool,
}

pub trait Policy: Send {
    fn poll(&mut self, view: &PolicyView<'_>, fresh: &[LogRecord]) -> Vec<HumanInput>;
}

fn ticks(seconds: f64, tick_length: f64) -> u64 {
    (seconds / tick_length).round() as u64
}

// ---------------------------------------------------------------------------
// Silent and scripted
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl Policy for Silent {
    fn poll(&mut self, _: &PolicyView<'_>, _: &[LogRecord]) -> Vec<HumanInput> {
        Vec::new()
    }
}

/// Plays timed inputs; an entry due at tick `t` is submitted after tick
/// `t - 1` so the world sees it during tick `t`.
#[derive(Debug, Clone)]
pub struct Scripted {
    queue: VecDeque<(u64, HumanInput)>,
}

impl Scripted {
    pub fn new(entries: &[ScriptEntry], tick_length: f64) -> Self {
        let mut v: Vec<(u64, HumanInput)> = entries
            .iter()
            .map(|e| (e.due_tick(tick_length), e.input.clone()))
            .collect();
        v.sort_by_key(|(t, _)| *t);
        Self { queue: v.into() }
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl Policy for Scripted {
    fn poll(&mut self, view: &PolicyView<'_>, _: &[LogRecord]) -> Vec<HumanInput> {
        let mut out = Vec::new();
        while self.queue.front().is_some_and(|(t, _)| *t <= view.tick + 1) {
            out.push(self.queue.pop_front().expect("checked").1);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Cooperative
// ---------------------------------------------------------------------------

/// Answers every question truthfully and does what it is asked, each after
/// a fixed latency counted from the end of the robot's sentence.
pub struct Cooperative {
    latency: f64,
    grammar: Grammar,
    delayed: Vec<(u64, HumanInput)>,
    last_moved_joint: Option<JointId>,
}

impl Cooperative {
    pub fn new(latency: f64) -> Self {
        Self {
            latency,
            grammar: Grammar::default(),
            delayed: Vec::new(),
            last_moved_joint: None,
        }
    }

    /// The reply to one robot sentence, read against the ground truth.
    fn answer(&self, text: &str, world: &WorldState) -> Option<HumanInput> {
        let speak = |text: String| Some(HumanInput::Speak { text });
        let parsed = self.grammar.parse(text).ok()?;
        let m = &parsed.meaning;
        let by_label = |label: &str| world.objects.iter().find(|o| o.present && o.true_label == label);
        match (parsed.template.as_str(), m.object.as_deref()) {
            ("tag_request", _) => match &world.robot.gaze {
                Some(GazeTarget::Object(id)) => speak(format!("This is the {}.", world.object(id)?.true_label)),
                _ => None,
            },
            ("agent_request", _) => speak(format!("I am {}.", world.human.true_name)),
            ("body_part_request", _) => {
                let joint = self.last_moved_joint?;
                speak(format!("This is your {}.", world.body_part(joint)?.true_name))
            }
            ("touch_request", Some(_)) => Some(HumanInput::TouchBodyPart {
                joint: self.last_moved_joint?,
            }),
            ("ask_push", Some(label)) => {
                let o = by_label(label)?;
                (o.region == Region::H).then(|| HumanInput::MoveObject {
                    object: o.id.clone(),
                    from: Region::H,
                    to: Region::S,
                })
            }
            ("ask_pull", Some(label)) => {
                let o = by_label(label)?;
                (o.region == Region::S).then(|| HumanInput::MoveObject {
                    object: o.id.clone(),
                    from: Region::S,
                    to: Region::H,
                })
            }
            ("ask_point", Some(label)) => Some(HumanInput::PointAt {
                object: by_label(label)?.id.clone(),
            }),
            _ => None,
        }
    }
}

impl Policy for Cooperative {
    fn poll(&mut self, view: &PolicyView<'_>, fresh: &[LogRecord]) -> Vec<HumanInput> {
        for r in fresh {
            match &r.event {
                EventKind::PrimitiveStarted {
                    primitive: RobotPrimitive::MoveBodyPart(j),
                } => self.last_moved_joint = Some(*j),
                EventKind::PrimitiveFinished {
                    primitive: RobotPrimitive::Say(text),
                    success: true,
                } => {
                    if let Some(input) = self.answer(text, view.world) {
                        let due = view.tick + ticks(self.latency, view.tick_length);
                        self.delayed.push((due, input));
                    }
                }
                _ => {}
            }
        }
        let (due, later): (Vec<_>, Vec<_>) = self.delayed.drain(..).partition(|(t, _)| *t <= view.tick + 1);
        self.delayed = later;
        due.into_iter().map(|(_, i)| i).collect()
    }
}

// ---------------------------------------------------------------------------
// Task driven
// ---------------------------------------------------------------------------

/// Cooperative, and additionally orders the robot to rearrange objects
/// towards a goal configuration whenever the robot has been idle for a
/// while and no order is outstanding.
pub struct TaskDriven {
    helper: Cooperative,
    goal: Vec<(String, Region)>,
    idle_before_order: f64,
    outstanding: bool,
    spoke_at: Option<u64>,
}

impl TaskDriven {
    pub fn new(latency: f64, idle_before_order: f64, goal: Vec<(String, Region)>) -> Self {
        Self {
            helper: Cooperative::new(latency),
            goal,
            idle_before_order,
            outstanding: false,
            spoke_at: None,
        }
    }

    fn next_order(&self, world: &WorldState) -> Option<String> {
        self.goal.iter().find_map(|(label, region)| {
            let o = world.objects.iter().find(|o| o.present && &o.true_label == label)?;
            if o.region == *region {
                return None;
            }
            match region {
                Region::I => Some(format!("Take the {label}.")),
                Region::H => Some(format!("Give me the {label}.")),
                Region::S => None,
            }
        })
    }
}

impl Policy for TaskDriven {
    fn poll(&mut self, view: &PolicyView<'_>, fresh: &[LogRecord]) -> Vec<HumanInput> {
        let mut out = self.helper.poll(view, fresh);
        for r in fresh {
            match &r.event {
                EventKind::PlanFinished { .. }
                | EventKind::GoalRefused { .. }
                | EventKind::UtteranceUnrecognized { .. } => self.outstanding = false,
                _ => {}
            }
        }
        if self.outstanding || view.task_completed || view.pending_goals || !view.robot_idle {
            return out;
        }
        let wait = ticks(self.idle_before_order, view.tick_length);
        let quiet_since = view.idle_since.max(self.spoke_at.unwrap_or(0));
        if view.tick < quiet_since + wait {
            return out;
        }
        if let Some(text) = self.next_order(view.world) {
            self.outstanding = true;
            self.spoke_at = Some(view.tick);
            out.push(HumanInput::Speak { text });
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Combination
// ---------------------------------------------------------------------------

/// Runs several policies side by side and concatenates their inputs.
pub struct Composite(pub Vec<Box<dyn Policy>>);

impl Policy for Composite {
    fn poll(&mut self, view: &PolicyView<'_>, fresh: &[LogRecord]) -> Vec<HumanInput> {
        self.0.iter_mut().flat_map(|p| p.poll(view, fresh)).collect()
    }
}

/// The policy a config asks for, with its script layered on top.
pub fn from_config(cfg: &Config) -> Box<dyn Policy> {
    let p = &cfg.policy;
    let base: Box<dyn Policy> = match p.kind {
        PolicyKind::Cooperative => Box::new(Cooperative::new(p.latency)),
        PolicyKind::TaskDriven => {
            let goal = cfg
                .task
                .as_ref()
                .map(|t| t.goal.iter().map(|(k, v)| (k.clone(), *v)).collect())
                .unwrap_or_default();
            Box::new(TaskDriven::new(p.latency, p.idle_before_order, goal))
        }
        PolicyKind::Silent | PolicyKind::Script => Box::new(Silent),
    };
    if p.script.is_empty() {
        base
    } else {
        Box::new(Composite(vec![
            base,
            Box::new(Scripted::new(&p.script, cfg.tick_length)),
        ]))
    }
}
