//! The shipped mixed-initiative scenario and its replay check.
//!
//! A run passes when eight ordered step matchers all succeed on its log
//! and its event-class sequence equals the frozen log shipped in
//! `assets/golden.jsonl`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::adaptive::EntityKind;
use crate::config::Config;
use crate::contextual::{ActivityOutcome, GoalKind, StepKind};
use crate::engine::EngineError;
use crate::log::{BindSlot, EventKind, EventLog, LogRecord, Source};
use crate::reactive::{BehaviorKind, DriveKind};
use crate::world::{Region, RobotPrimitive};

use super::runner::run;

pub const GOLDEN_CONFIG: &str = include_str!("../../assets/golden.toml");
pub const GOLDEN_LOG: &str = include_str!("../../assets/golden.jsonl");

pub fn golden_config() -> Config {
    Config::from_toml(GOLDEN_CONFIG).expect("shipped golden config is valid")
}

pub fn frozen_log() -> EventLog {
    EventLog::from_jsonl(GOLDEN_LOG).expect("shipped golden log is well formed")
}

pub fn run_scenario(cfg: &Config) -> Result<EventLog, EngineError> {
    Ok(run(cfg)?.log)
}

// ---------------------------------------------------------------------------
// Step matchers
// ---------------------------------------------------------------------------

pub const STEP_NAMES: [&str; 8] = [
    "scene detected",
    "acquisition drive decays",
    "robot asks the partner's name",
    "partner name bound",
    "robot asks an object's name and binds it",
    "robot points at the known object",
    "partner order carried out by a plan",
    "robot tags a body part",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepMatch {
    pub step: usize,
    pub name: &'static str,
    pub time_s: f64,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("step {step} ({name}) failed after seq {after_seq}: {reason}")]
pub struct StepFailure {
    pub step: usize,
    pub name: &'static str,
    pub after_seq: u64,
    pub reason: String,
}

#[derive(Default)]
struct Ctx {
    kinds: BTreeMap<String, EntityKind>,
    object: Option<String>,
    label: Option<String>,
    body_part: Option<String>,
}

struct Cursor<'a> {
    recs: &'a [LogRecord],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// First record at or after the cursor satisfying `pred`.
    fn find(&mut self, what: &str, pred: impl Fn(&LogRecord) -> bool) -> Result<&'a LogRecord, String> {
        let i = self.recs[self.pos..]
            .iter()
            .position(&pred)
            .ok_or_else(|| format!("no {what}"))?;
        self.pos += i + 1;
        Ok(&self.recs[self.pos - 1])
    }

    /// The next record of a class must satisfy `pred`.
    fn next(
        &mut self,
        what: &str,
        class: impl Fn(&EventKind) -> bool,
        pred: impl Fn(&EventKind) -> bool,
    ) -> Result<&'a LogRecord, String> {
        let r = self.find(what, |r| class(&r.event))?;
        if pred(&r.event) {
            Ok(r)
        } else {
            Err(format!(
                "expected {what}, found {} at seq {}",
                class_of(&r.event),
                r.seq
            ))
        }
    }

    fn seq(&self) -> u64 {
        self.pos.saturating_sub(1) as u64
    }
}

pub fn class_of(e: &EventKind) -> String {
    serde_json::to_value(e)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
        .unwrap_or_default()
}

fn is_trigger(e: &EventKind) -> bool {
    matches!(e, EventKind::DriveTriggered { .. })
}

fn is_behavior_start(e: &EventKind) -> bool {
    matches!(e, EventKind::BehaviorStarted { .. })
}

fn spoke<'r>(text: &'r str) -> impl Fn(&LogRecord) -> bool + 'r {
    move |r| matches!(&r.event, EventKind::RobotSpoke { text: t } if t == text)
}

fn step(n: usize, c: &mut Cursor<'_>, ctx: &mut Ctx) -> Result<(), String> {
    match n {
        1 => {
            let end = c.recs.iter().position(|r| r.tick > 1).unwrap_or(c.recs.len());
            for r in &c.recs[..end] {
                if let EventKind::EntityRegistered { entity, entity_kind } = &r.event {
                    ctx.kinds.insert(entity.clone(), *entity_kind);
                }
            }
            for kind in [EntityKind::Object, EntityKind::BodyPart] {
                if !ctx.kinds.values().any(|k| *k == kind) {
                    return Err(format!("no {kind:?} registered on the first tick"));
                }
            }
            c.pos = end;
            Ok(())
        }
        2 => {
            let first = c
                .recs
                .iter()
                .position(|r| is_trigger(&r.event))
                .ok_or("no drive trigger at all")?;
            let levels: Vec<(f64, f64)> = c.recs[..first]
                .iter()
                .filter_map(|r| match &r.event {
                    EventKind::DriveLevels { levels } => {
                        let get = |k| levels.iter().find(|l| l.drive == k).map(|l| l.level);
                        Some((
                            get(DriveKind::KnowledgeAcquisition)?,
                            get(DriveKind::KnowledgeExpression)?,
                        ))
                    }
                    _ => None,
                })
                .collect();
            if levels.len() < 2 {
                return Err("too few drive records before the first trigger".into());
            }
            if !levels.windows(2).all(|w| w[1].0 < w[0].0) {
                return Err("acquisition drive is not decaying".into());
            }
            if !levels.windows(2).all(|w| w[1].1 == w[0].1) {
                return Err("expression drive is not constant".into());
            }
            c.pos = c.pos.max(first);
            Ok(())
        }
        3 => {
            c.next("acquisition trigger", is_trigger, |e| {
                matches!(
                    e,
                    EventKind::DriveTriggered {
                        drive: DriveKind::KnowledgeAcquisition,
                        ..
                    }
                )
            })?;
            let kinds = &ctx.kinds;
            c.next(
                "information acquisition aimed at the partner",
                is_behavior_start,
                |e| match e {
                    EventKind::BehaviorStarted {
                        behavior: BehaviorKind::AcquireInfo,
                        target: Some(t),
                        ..
                    } => kinds.get(t) == Some(&EntityKind::Agent),
                    _ => false,
                },
            )?;
            c.find("name question", spoke("I do not know you, who are you?"))?;
            Ok(())
        }
        4 => {
            c.find("partner reply", |r| matches!(r.event, EventKind::HumanSpoke { .. }))?;
            let kinds = &ctx.kinds;
            c.next(
                "partner name bound",
                |e| matches!(e, EventKind::Bound { .. }),
                |e| matches!(e, EventKind::Bound { entity, slot: BindSlot::Label, .. } if kinds.get(entity) == Some(&EntityKind::Agent)),
            )?;
            c.next(
                "successful behavior end",
                |e| matches!(e, EventKind::BehaviorFinished { .. }),
                |e| {
                    matches!(
                        e,
                        EventKind::BehaviorFinished {
                            outcome: ActivityOutcome::Success,
                            ..
                        }
                    )
                },
            )?;
            Ok(())
        }
        5 => {
            c.next("acquisition trigger", is_trigger, |e| {
                matches!(
                    e,
                    EventKind::DriveTriggered {
                        drive: DriveKind::KnowledgeAcquisition,
                        ..
                    }
                )
            })?;
            let kinds = &ctx.kinds;
            let r = c.next(
                "information acquisition aimed at an object",
                is_behavior_start,
                |e| match e {
                    EventKind::BehaviorStarted {
                        behavior: BehaviorKind::AcquireInfo,
                        target: Some(t),
                        ..
                    } => kinds.get(t) == Some(&EntityKind::Object),
                    _ => false,
                },
            )?;
            if let EventKind::BehaviorStarted { target, .. } = &r.event {
                ctx.object = target.clone();
            }
            c.find("object question", spoke("What is this object?"))?;
            let obj = ctx.object.clone();
            let r = c.next(
                "object label bound",
                |e| matches!(e, EventKind::Bound { .. }),
                |e| matches!(e, EventKind::Bound { entity, slot: BindSlot::Label, .. } if Some(entity) == obj.as_ref()),
            )?;
            if let EventKind::Bound { value, .. } = &r.event {
                ctx.label = Some(value.clone());
            }
            Ok(())
        }
        6 => {
            c.next("expression trigger", is_trigger, |e| {
                matches!(
                    e,
                    EventKind::DriveTriggered {
                        drive: DriveKind::KnowledgeExpression,
                        ..
                    }
                )
            })?;
            let obj = ctx.object.clone().unwrap_or_default();
            c.next("knowledge expression about the object", is_behavior_start, |e| {
                matches!(e, EventKind::BehaviorStarted { behavior: BehaviorKind::ExpressKnowledge, target: Some(t), .. } if *t == obj)
            })?;
            let o = obj.clone();
            c.find("pointing at the object", move |r| {
                matches!(&r.event, EventKind::PrimitiveStarted { primitive: RobotPrimitive::PointAt(x) } if *x == o)
            })?;
            let line = format!("This is a {}.", ctx.label.clone().unwrap_or_default());
            c.find("the object's name said", spoke(&line))?;
            Ok(())
        }
        7 => {
            let order = format!("Take the {}.", ctx.label.clone().unwrap_or_default());
            c.find(
                "take order",
                |r| matches!(&r.event, EventKind::HumanSpoke { text } if *text == order),
            )?;
            c.next(
                "take goal",
                |e| matches!(e, EventKind::GoalAdopted { .. }),
                |e| matches!(e, EventKind::GoalAdopted { goal, .. } if goal.kind == GoalKind::Take),
            )?;
            c.next(
                "plan [ask_push, pull]",
                |e| matches!(e, EventKind::PlanStarted { .. }),
                |e| match e {
                    EventKind::PlanStarted { actions, .. } => {
                        actions.iter().map(|a| a.action.step()).collect::<Vec<_>>()
                            == [StepKind::AskPush, StepKind::RobotPull]
                    }
                    _ => false,
                },
            )?;
            let step_start = |e: &EventKind| matches!(e, EventKind::PlanStepStarted { .. });
            c.next("ask_push step", step_start, |e| {
                matches!(
                    e,
                    EventKind::PlanStepStarted {
                        step: StepKind::AskPush,
                        ..
                    }
                )
            })?;
            let obj = ctx.object.clone().unwrap_or_default();
            c.find("partner moves the object to the shared area", |r| {
                r.source == Source::Human
                    && matches!(&r.event, EventKind::ObjectMoved { object, from: Region::H, to: Region::S } if *object == obj)
            })?;
            c.next("pull step", step_start, |e| {
                matches!(
                    e,
                    EventKind::PlanStepStarted {
                        step: StepKind::RobotPull,
                        ..
                    }
                )
            })?;
            c.find("robot pulls the object in", |r| {
                r.source == Source::Robot
                    && matches!(&r.event, EventKind::ObjectMoved { object, from: Region::S, to: Region::I } if *object == obj)
            })?;
            c.next(
                "successful plan end",
                |e| matches!(e, EventKind::PlanFinished { .. }),
                |e| {
                    matches!(
                        e,
                        EventKind::PlanFinished {
                            outcome: ActivityOutcome::Success,
                            ..
                        }
                    )
                },
            )?;
            Ok(())
        }
        8 => {
            c.next("acquisition trigger", is_trigger, |e| {
                matches!(
                    e,
                    EventKind::DriveTriggered {
                        drive: DriveKind::KnowledgeAcquisition,
                        ..
                    }
                )
            })?;
            let kinds = &ctx.kinds;
            let r = c.next(
                "information acquisition aimed at a body part",
                is_behavior_start,
                |e| match e {
                    EventKind::BehaviorStarted {
                        behavior: BehaviorKind::AcquireInfo,
                        target: Some(t),
                        ..
                    } => kinds.get(t) == Some(&EntityKind::BodyPart),
                    _ => false,
                },
            )?;
            if let EventKind::BehaviorStarted { target, .. } = &r.event {
                ctx.body_part = target.clone();
            }
            c.find("body part moved", |r| {
                matches!(
                    &r.event,
                    EventKind::PrimitiveStarted {
                        primitive: RobotPrimitive::MoveBodyPart(_)
                    }
                )
            })?;
            c.find("body part question", spoke("How do you call this part of my body?"))?;
            let part = ctx.body_part.clone();
            c.next(
                "body part label bound",
                |e| matches!(e, EventKind::Bound { .. }),
                |e| matches!(e, EventKind::Bound { entity, slot: BindSlot::Label, .. } if Some(entity) == part.as_ref()),
            )?;
            Ok(())
        }
        _ => unreachable!("eight steps"),
    }
}

/// Runs the eight matchers in order, stopping at the first failure.
pub fn check_steps(log: &EventLog) -> Result<Vec<StepMatch>, StepFailure> {
    let mut c = Cursor {
        recs: log.records(),
        pos: 0,
    };
    let mut ctx = Ctx::default();
    let mut out = Vec::new();
    for n in 1..=8 {
        let after = c.seq();
        step(n, &mut c, &mut ctx).map_err(|reason| StepFailure {
            step: n,
            name: STEP_NAMES[n - 1],
            after_seq: after,
            reason,
        })?;
        let last = c.seq();
        out.push(StepMatch {
            step: n,
            name: STEP_NAMES[n - 1],
            time_s: log.records().get(last as usize).map_or(0.0, |r| r.time_s),
            last_seq: last,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Frozen log comparison
// ---------------------------------------------------------------------------

/// `(tick, class)` for every record except the per-tick drive levels.
pub fn event_classes(log: &EventLog) -> Vec<(u64, String)> {
    log.records()
        .iter()
        .filter(|r| !matches!(r.event, EventKind::DriveLevels { .. }))
        .map(|r| (r.tick, class_of(&r.event)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("event class {index} differs: expected {expected:?}, found {found:?}")]
pub struct Divergence {
    pub index: usize,
    pub expected: Option<(u64, String)>,
    pub found: Option<(u64, String)>,
}

pub fn compare_classes(expected: &EventLog, found: &EventLog) -> Result<(), Divergence> {
    let a = event_classes(expected);
    let b = event_classes(found);
    let n = a.len().max(b.len());
    for i in 0..n {
        if a.get(i) != b.get(i) {
            return Err(Divergence {
                index: i,
                expected: a.get(i).cloned(),
                found: b.get(i).cloned(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GoldenReport {
    pub steps: Vec<StepMatch>,
    pub failure: Option<StepFailure>,
    pub divergence: Option<Divergence>,
    #[serde(skip)]
    pub elapsed: Duration,
    #[serde(skip)]
    pub log: EventLog,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.divergence.is_none()
    }
}

/// Run `cfg` and check it; the frozen log comparison is skipped when
/// `frozen` is `None`.
pub fn replay(cfg: &Config, frozen: Option<&EventLog>) -> Result<GoldenReport, EngineError> {
    let t0 = Instant::now();
    let log = run_scenario(cfg)?;
    let elapsed = t0.elapsed();
    let (steps, failure) = match check_steps(&log) {
        Ok(s) => (s, None),
        Err(f) => (Vec::new(), Some(f)),
    };
    let divergence = frozen.and_then(|f| compare_classes(f, &log).err());
    Ok(GoldenReport {
        steps,
        failure,
        divergence,
        elapsed,
        log,
    })
}

pub fn replay_golden() -> GoldenReport {
    replay(&golden_config(), Some(&frozen_log())).expect("shipped golden config runs")
}
