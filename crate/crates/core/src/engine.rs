//! The tick loop tying the world, perception, drives, behaviors and plans
//! together.
//!
//! Each tick runs, in order: world step, perception of the new events,
//! registration of newly seen entities, saliency, drive decay, the active
//! activity, scheduling of the next activity when idle, and task checking.
//! An activity started at tick `t` first runs at `t + 1`.

use std::collections::{BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    saliency, ActionClassifier, BindOutcome, Binding, Entity, EntityId, EntityKind, FaceOracle, Grammar, Opc, Paor,
    Payload,
};
use crate::config::{Config, ConfigError};
use crate::contextual::abm::ObjectSample;
use crate::contextual::{
    build_igarf, goal_from_meaning, narrate, plan, why_answer, Abm, AbmError, ActivityOutcome, Detail, EpisodeRecord,
    Goal, GoalKind, Initiator, Inventory, NarrativeQuery, PlannedAction, Snapshot, StepKind, StreamSample,
};
use crate::log::{DriveLevel, EventKind, EventLog, LogRecord, Source};
use crate::reactive::{
    build_acquisition_behavior, build_expression_behavior, choose_acquisition_target, choose_expression_target,
    BehaviorKind, BehaviorRequest, DriveKind, Drives, Expectation, ScriptStep,
};
use crate::world::{GazeTarget, Hand, HumanInput, ObjectId, Region, RobotPrimitive, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Abm(#[from] AbmError),
    #[error("invalid drives: {0}")]
    Drives(String),
}

/// RNG stream ids; the world owns stream 1.
const STREAM_TARGET: u64 = 2;
const STREAM_CLASSIFY: u64 = 3;
const STREAM_FACE: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn agent_entity_id() -> EntityId {
    "agent_1".into()
}

pub fn body_part_entity_id(joint: u32) -> EntityId {
    format!("body_{joint}")
}

pub fn action_entity_id(label: &str) -> EntityId {
    format!("action_{label}")
}

// ---------------------------------------------------------------------------
// Activities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
struct Script {
    steps: VecDeque<ScriptStep>,
    running: bool,
    expect: Option<Expectation>,
    satisfied: bool,
    deadline: Option<u64>,
    timed_out: bool,
    primitive_failed: bool,
}

impl Script {
    fn new(steps: Vec<ScriptStep>) -> Self {
        Self {
            steps: steps.into(),
            ..Default::default()
        }
    }
}

enum Progress {
    Busy,
    Done,
}

#[derive(Debug, Clone)]
struct PlanState {
    goal: Goal,
    label: String,
    object: Option<ObjectId>,
    queue: VecDeque<PlannedAction>,
    step: Option<(StepKind, Option<PlannedAction>)>,
    attempt: u32,
    learn_attempt: u32,
    deadline: u64,
    closing: Option<ActivityOutcome>,
}

#[derive(Debug, Clone)]
struct Activity {
    id: u64,
    behavior: BehaviorKind,
    initiator: Initiator,
    goal: Option<Goal>,
    target: Option<EntityId>,
    pre: Snapshot,
    start_tick: u64,
    start_s: f64,
    start_seq: u64,
    stream: Vec<StreamSample>,
    script: Script,
    plan: Option<PlanState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityView {
    pub id: u64,
    pub behavior: BehaviorKind,
    pub initiator: Initiator,
    pub goal: Option<Goal>,
    pub target: Option<EntityId>,
    pub plan: bool,
    pub start_tick: u64,
    pub awaiting: Option<Expectation>,
}

/// Read-only copy of the full engine state at a tick boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineSnapshot {
    pub tick: u64,
    pub time_s: f64,
    pub world: WorldState,
    pub opc: Vec<Entity>,
    pub drives: Vec<DriveLevel>,
    pub activity: Option<ActivityView>,
    pub pending_goals: Vec<Goal>,
    pub task_completed: bool,
    pub log_len: u64,
}

#[derive(Debug, Clone)]
enum Pending {
    Goal(Goal),
    Verbal { kind: BehaviorKind, lines: Vec<String> },
}

#[derive(Debug, Clone)]
struct ActionSeen {
    label: String,
    object: ObjectId,
    hand: Hand,
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

pub struct Engine {
    config: Config,
    world: WorldState,
    opc: Opc,
    drives: Drives,
    grammar: Grammar,
    abm: Abm,
    log: EventLog,
    inventory: Inventory,
    classifier: ActionClassifier,
    face: FaceOracle,
    rng_target: ChaCha8Rng,
    rng_classify: ChaCha8Rng,
    rng_face: ChaCha8Rng,
    inbox: Vec<HumanInput>,
    activity: Option<Activity>,
    pending: VecDeque<Pending>,
    next_activity: u64,
    last_action: Option<ActionSeen>,
    story_cursor: Option<u64>,
    task_goal: Vec<(ObjectId, Region)>,
    task_done: bool,
    idle_since: u64,
}

impl Engine {
    pub fn new(config: Config) -> Result<Self, EngineError> {
        config.validate("")?;
        let abm = match &config.abm.dir {
            Some(dir) => {
                let session = config
                    .abm
                    .session
                    .clone()
                    .unwrap_or_else(|| format!("{}-seed{}", config.name, config.seed));
                Abm::open(dir, session)?
            }
            None => Abm::in_memory(config.abm.session.clone().unwrap_or_else(|| config.name.clone())),
        };
        Self::with_abm(config, abm)
    }

    pub fn with_abm(config: Config, abm: Abm) -> Result<Self, EngineError> {
        let drives = Drives::new(config.drive_specs().to_vec()).map_err(EngineError::Drives)?;
        let world = config.build_world();
        let task_goal = config
            .task
            .iter()
            .flat_map(|t| t.goal.iter())
            .filter_map(|(label, region)| {
                world
                    .objects
                    .iter()
                    .find(|o| &o.true_label == label)
                    .map(|o| (o.id.clone(), *region))
            })
            .collect();
        let next_activity = abm.next_id();
        Ok(Self {
            world,
            opc: Opc::new(),
            drives,
            grammar: Grammar::default(),
            abm,
            log: EventLog::new(),
            inventory: Inventory::standard(),
            classifier: ActionClassifier::new(config.recognition.confusion.clone()),
            face: FaceOracle {
                miss_rate: config.recognition.face_miss_rate,
            },
            rng_target: rng(config.seed, STREAM_TARGET),
            rng_classify: rng(config.seed, STREAM_CLASSIFY),
            rng_face: rng(config.seed, STREAM_FACE),
            inbox: Vec::new(),
            activity: None,
            pending: VecDeque::new(),
            next_activity,
            last_action: None,
            story_cursor: None,
            task_goal,
            task_done: false,
            idle_since: 0,
            config,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    /// Direct world access for harness fixtures (e.g. a partner leaving).
    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn opc(&self) -> &Opc {
        &self.opc
    }

    pub fn drives(&self) -> &Drives {
        &self.drives
    }

    pub fn drives_mut(&mut self) -> &mut Drives {
        &mut self.drives
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    pub fn abm(&self) -> &Abm {
        &self.abm
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn set_inventory(&mut self, inventory: Inventory) {
        self.inventory = inventory;
    }

    pub fn tick(&self) -> u64 {
        self.world.tick
    }

    pub fn is_idle(&self) -> bool {
        self.activity.is_none()
    }

    /// Last tick at which an activity finished (or 0).
    pub fn idle_since(&self) -> u64 {
        self.idle_since
    }

    pub fn has_pending_goals(&self) -> bool {
        !self.pending.is_empty()
    }

    pub fn task_completed(&self) -> bool {
        self.task_done
    }

    pub fn has_task(&self) -> bool {
        !self.task_goal.is_empty()
    }

    /// Queue a partner input for the next tick boundary.
    pub fn submit(&mut self, input: HumanInput) {
        self.inbox.push(input);
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            tick: self.world.tick,
            time_s: self.world.time_s(),
            world: self.world.clone(),
            opc: self.opc.snapshot(),
            drives: self.drives.levels(),
            activity: self.activity.as_ref().map(|a| ActivityView {
                id: a.id,
                behavior: a.behavior,
                initiator: a.initiator,
                goal: a.goal.clone(),
                target: a.target.clone(),
                plan: a.plan.is_some(),
                start_tick: a.start_tick,
                awaiting: a.script.expect.clone().filter(|_| !a.script.satisfied),
            }),
            pending_goals: self
                .pending
                .iter()
                .filter_map(|p| match p {
                    Pending::Goal(g) => Some(g.clone()),
                    Pending::Verbal { .. } => None,
                })
                .collect(),
            task_completed: self.task_done,
            log_len: self.log.len() as u64,
        }
    }

    fn emit(&mut self, source: Source, event: EventKind) -> u64 {
        self.log.append(self.world.tick, self.world.time_s(), source, event)
    }

    fn emit_all(&mut self, events: Vec<(Source, EventKind)>) {
        for (s, e) in events {
            self.emit(s, e);
        }
    }

    /// Advance one tick and return the records it produced.
    pub fn step(&mut self) -> &[LogRecord] {
        let first = self.log.len() as u64;
        let inputs = std::mem::take(&mut self.inbox);
        let emitted = self.world.step(inputs);
        let mut pointed = BTreeSet::new();
        let start = self.log.len();
        self.emit_all(emitted);
        let fresh: Vec<LogRecord> = self.log.records()[start..].to_vec();
        self.register_entities();
        for rec in &fresh {
            if let EventKind::HumanPointed { object } = &rec.event {
                pointed.insert(object.clone());
            }
            self.perceive(rec);
        }
        self.update_saliency(&pointed);
        let counts = self.opc.modulator_counts();
        self.drives.update(counts, self.world.tick_length);
        let levels = self.drives.levels();
        self.emit(Source::Robot, EventKind::DriveLevels { levels });
        self.sample_stream();
        self.advance_activity();
        if self.activity.is_none() {
            self.start_next_activity();
        }
        self.check_task();
        self.log.since(first)
    }

    /// Step until the tick budget or (optionally) task completion.
    pub fn run_for(&mut self, ticks: u64) {
        for _ in 0..ticks {
            self.step();
        }
    }

    // -- perception --------------------------------------------------------

    fn register_entities(&mut self) {
        let tick_objects: Vec<_> = self
            .world
            .objects
            .iter()
            .filter(|o| o.present && !self.opc.contains(&o.id))
            .cloned()
            .collect();
        for o in tick_objects {
            let known = self.config.objects.iter().any(|c| c.id == o.id && c.known);
            self.opc.insert(Entity {
                id: o.id.clone(),
                kind: EntityKind::Object,
                label: known.then(|| o.true_label.clone()),
                present: true,
                saliency: 0.0,
                payload: Payload::Object {
                    object: o.id.clone(),
                    region: o.region,
                    position: o.position,
                    dimensions: o.dimensions,
                },
            });
            self.emit(
                Source::Robot,
                EventKind::EntityRegistered {
                    entity: o.id.clone(),
                    entity_kind: EntityKind::Object,
                },
            );
        }
        let agent = agent_entity_id();
        if self.world.human.present && !self.opc.contains(&agent) {
            let signature = FaceOracle::signature(&self.world.human.true_name);
            let remembered = self.remembered_name(&signature);
            let recognized = self.face.recognizes(remembered.is_some(), &mut self.rng_face);
            let label = if self.config.human.known {
                Some(self.world.human.true_name.clone())
            } else if recognized {
                remembered.clone()
            } else {
                None
            };
            self.opc.insert(Entity {
                id: agent.clone(),
                kind: EntityKind::Agent,
                label: label.clone(),
                present: true,
                saliency: 0.0,
                payload: Payload::Agent {
                    face_signature: signature,
                },
            });
            self.emit(
                Source::Robot,
                EventKind::EntityRegistered {
                    entity: agent.clone(),
                    entity_kind: EntityKind::Agent,
                },
            );
            if let (true, false, Some(l)) = (recognized, self.config.human.known, label) {
                self.emit(
                    Source::Robot,
                    EventKind::Recognized {
                        entity: agent,
                        label: l,
                    },
                );
            }
        }
        let parts: Vec<_> = self
            .world
            .robot
            .body_parts
            .iter()
            .filter(|b| !self.opc.contains(&body_part_entity_id(b.joint)))
            .cloned()
            .collect();
        for b in parts {
            let id = body_part_entity_id(b.joint);
            let known = self.config.body_parts.iter().any(|c| c.joint == b.joint && c.known);
            self.opc.insert(Entity {
                id: id.clone(),
                kind: EntityKind::BodyPart,
                label: known.then(|| b.true_name.clone()),
                present: true,
                saliency: 0.0,
                payload: Payload::BodyPart {
                    joint: b.joint,
                    tactile: known.then_some(b.tactile),
                },
            });
            self.emit(
                Source::Robot,
                EventKind::EntityRegistered {
                    entity: id,
                    entity_kind: EntityKind::BodyPart,
                },
            );
        }
    }

    /// Name bound to a face in an earlier episode, if any.
    fn remembered_name(&self, signature: &str) -> Option<String> {
        self.abm.episodes().iter().rev().find_map(|ep| {
            ep.post.opc.iter().find_map(|e| match &e.payload {
                Payload::Agent { face_signature } if face_signature == signature => e.label.clone(),
                _ => None,
            })
        })
    }

    fn bind(&mut self, entity: &str, binding: Binding) -> Option<BindOutcome> {
        let slot = BindOutcome::slot(&binding);
        let value = match &binding {
            Binding::Label(l) => l.trim().to_string(),
            Binding::Touch(t) => t.to_string(),
        };
        let outcome = self.opc.bind(entity, binding).ok()?;
        if let Some(other) = &outcome.displaced {
            self.emit(
                Source::Robot,
                EventKind::Unbound {
                    entity: other.clone(),
                    label: value.clone(),
                },
            );
        }
        if let Some(old) = &outcome.retagged_from {
            self.emit(
                Source::Robot,
                EventKind::Retagged {
                    entity: entity.to_string(),
                    old: old.clone(),
                    new: value.clone(),
                },
            );
        }
        if outcome.changed {
            self.emit(
                Source::Robot,
                EventKind::Bound {
                    entity: entity.to_string(),
                    slot,
                    value,
                },
            );
        }
        Some(outcome)
    }

    fn expectation(&self) -> Option<Expectation> {
        self.activity
            .as_ref()
            .and_then(|a| a.script.expect.clone().filter(|_| !a.script.satisfied))
    }

    fn satisfy(&mut self) {
        if let Some(a) = self.activity.as_mut() {
            a.script.satisfied = true;
        }
    }

    fn perceive(&mut self, rec: &LogRecord) {
        match &rec.event {
            EventKind::HumanSpoke { text } => self.hear(text),
            EventKind::HumanPointed { object } => {
                if let Some(Expectation::PointAt { label }) = self.expectation() {
                    if let Some(id) = self.opc.entity_for_object(object).map(|e| e.id.clone()) {
                        self.bind(&id, Binding::Label(label));
                        self.satisfy();
                    }
                }
            }
            EventKind::HumanTouched { joint, tactile } => {
                if let Some(Expectation::Touch { entity, joint: j }) = self.expectation() {
                    if j == *joint {
                        self.bind(&entity, Binding::Touch(*tactile));
                        self.satisfy();
                    }
                }
            }
            EventKind::HumanActed { action, object, hand } => {
                let c = self.classifier.classify(action, &mut self.rng_classify);
                self.emit(
                    Source::Robot,
                    EventKind::ActionClassified {
                        action: c.label.clone(),
                        confidence: c.confidence,
                        object: object.clone(),
                    },
                );
                if c.is_known() {
                    let id = action_entity_id(&c.label);
                    if !self.opc.contains(&id) {
                        self.opc.insert(Entity {
                            id: id.clone(),
                            kind: EntityKind::Action,
                            label: Some(c.label.clone()),
                            present: true,
                            saliency: 0.0,
                            payload: Payload::Action {
                                classifier_signature: format!("classifier:{}", c.label),
                            },
                        });
                        self.emit(
                            Source::Robot,
                            EventKind::EntityRegistered {
                                entity: id,
                                entity_kind: EntityKind::Action,
                            },
                        );
                    }
                    self.last_action = Some(ActionSeen {
                        label: c.label,
                        object: object.clone(),
                        hand: *hand,
                    });
                } else {
                    self.last_action = None;
                }
            }
            EventKind::ObjectMoved { object, to, .. } => {
                let pos = self.world.object(object).map(|o| o.position);
                if let Some(e) = self.opc.get_mut(object) {
                    if let Payload::Object { region, position, .. } = &mut e.payload {
                        *region = *to;
                        if let Some(p) = pos {
                            *position = p;
                        }
                    }
                }
                if rec.source == Source::Human {
                    if let Some(Expectation::RegionChange { object: o }) = self.expectation() {
                        if &o == object {
                            self.satisfy();
                        }
                    }
                }
            }
            _ => {}
        }
    }

    fn hear(&mut self, text: &str) {
        let parsed = match self.grammar.parse(text) {
            Ok(p) => p,
            Err(_) => {
                self.emit(
                    Source::Robot,
                    EventKind::UtteranceUnrecognized { text: text.to_string() },
                );
                let line = self.grammar.say("not_understood", &[]).expect("shipped template");
                self.pending.push_back(Pending::Verbal {
                    kind: BehaviorKind::InteractVerbally,
                    lines: vec![line],
                });
                return;
            }
        };
        self.emit(
            Source::Robot,
            EventKind::UtteranceParsed {
                text: text.to_string(),
                template: parsed.template.clone(),
                meaning: parsed.meaning.clone(),
            },
        );
        let m = &parsed.meaning;
        if let Some(expect) = self.expectation() {
            if let Some((entity, label)) = reply_label(&expect, m) {
                self.bind(&entity, Binding::Label(label));
                self.satisfy();
                return;
            }
        }
        if is_reply(m) {
            return;
        }
        if m.predicate == "show_learned" {
            let line = self.grammar.say("show_learned_reply", &[]).expect("shipped template");
            self.pending.push_back(Pending::Verbal {
                kind: BehaviorKind::ShowLearned,
                lines: vec![line],
            });
            return;
        }
        match goal_from_meaning(m) {
            Ok(goal) => {
                let label = goal.target.clone().filter(|_| goal.needs_object());
                self.emit(
                    Source::Robot,
                    EventKind::GoalAdopted {
                        goal: goal.clone(),
                        label,
                    },
                );
                self.pending.push_back(Pending::Goal(goal));
            }
            Err(_) => {
                self.emit(Source::Robot, EventKind::GoalRefused { text: text.to_string() });
                let line = self.grammar.say("refusal", &[]).expect("shipped template");
                self.pending.push_back(Pending::Verbal {
                    kind: BehaviorKind::InteractVerbally,
                    lines: vec![line],
                });
            }
        }
    }

    fn update_saliency(&mut self, pointed: &BTreeSet<ObjectId>) {
        let dt = self.world.tick_length;
        let params = self.config.saliency;
        let human_present = self.world.human.present;
        for e in self.opc.iter_mut() {
            match &e.payload {
                Payload::Object { object, .. } => {
                    let (present, v) = self
                        .world
                        .objects
                        .iter()
                        .find(|o| &o.id == object)
                        .map(|o| (o.present, o.velocity))
                        .unwrap_or((false, [0.0, 0.0]));
                    e.present = present;
                    e.saliency = params.update(e.saliency, saliency::speed(v), pointed.contains(object), dt);
                }
                Payload::Agent { .. } => {
                    e.present = human_present;
                    e.saliency = params.update(e.saliency, 0.0, false, dt);
                }
                _ => {}
            }
        }
    }

    // -- activities --------------------------------------------------------

    fn snapshot_now(&self, goal: Option<Goal>) -> Snapshot {
        Snapshot {
            tick: self.world.tick,
            time_s: self.world.time_s(),
            opc: self.opc.snapshot(),
            drives: self.drives.levels(),
            goal,
        }
    }

    fn sample_stream(&mut self) {
        let every = self.config.ticks_for(self.config.abm.stream_period).max(1);
        let tick = self.world.tick;
        let Some(a) = self.activity.as_ref() else { return };
        if !(tick - a.start_tick).is_multiple_of(every) || tick == a.start_tick {
            return;
        }
        let sample = StreamSample {
            tick,
            time_s: self.world.time_s(),
            objects: self
                .world
                .objects
                .iter()
                .filter(|o| o.present)
                .map(|o| ObjectSample {
                    id: o.id.clone(),
                    region: o.region,
                    position: o.position,
                })
                .collect(),
            human_present: self.world.human.present,
            robot_primitive: self.world.robot.active.as_ref().map(|p| p.primitive.name().to_string()),
        };
        self.activity.as_mut().expect("checked").stream.push(sample);
    }

    fn begin(
        &mut self,
        behavior: BehaviorKind,
        initiator: Initiator,
        goal: Option<Goal>,
        target: Option<EntityId>,
        script: Vec<ScriptStep>,
        plan: Option<PlanState>,
    ) -> u64 {
        let id = self.next_activity;
        self.next_activity += 1;
        let pre = self.snapshot_now(goal.clone());
        let triggered = match initiator {
            Initiator::RobotDrive(d) => Some(d),
            Initiator::HumanOrder => None,
        };
        self.drives.on_behavior_start(triggered);
        let start_seq = self.log.len() as u64;
        match &plan {
            Some(p) => self.emit(
                Source::Robot,
                EventKind::PlanStarted {
                    activity: id,
                    goal: p.goal.clone(),
                    actions: p.queue.iter().copied().collect(),
                },
            ),
            None => self.emit(
                Source::Robot,
                EventKind::BehaviorStarted {
                    activity: id,
                    behavior,
                    target: target.clone(),
                    initiator,
                },
            ),
        };
        self.activity = Some(Activity {
            id,
            behavior,
            initiator,
            goal,
            target,
            pre,
            start_tick: self.world.tick,
            start_s: self.world.time_s(),
            start_seq,
            stream: Vec::new(),
            script: Script::new(script),
            plan,
        });
        id
    }

    fn start_next_activity(&mut self) {
        if let Some(p) = self.pending.pop_front() {
            match p {
                Pending::Goal(goal) => self.start_plan(goal),
                Pending::Verbal { kind, lines } => {
                    let req = crate::reactive::behaviors::verbal_behavior(kind, lines);
                    self.begin(req.kind, Initiator::HumanOrder, None, None, req.script, None);
                }
            }
            return;
        }
        let opc = &self.opc;
        let eligible = |d: DriveKind| {
            opc.iter().any(|e| {
                e.in_scene()
                    && match d {
                        DriveKind::KnowledgeAcquisition => e.missing_information(),
                        DriveKind::KnowledgeExpression => !e.missing_information(),
                    }
            })
        };
        let Some(drive) = self.drives.schedule_eligible(false, eligible) else {
            return;
        };
        let level = self.drives.level(drive).unwrap_or(0.0);
        let request = match drive {
            DriveKind::KnowledgeAcquisition => choose_acquisition_target(&self.opc, &mut self.rng_target)
                .and_then(|id| build_acquisition_behavior(self.opc.get(&id).expect("chosen"), &self.grammar)),
            DriveKind::KnowledgeExpression => choose_expression_target(&self.opc, &mut self.rng_target)
                .and_then(|id| build_expression_behavior(self.opc.get(&id).expect("chosen"), &self.grammar)),
        };
        let Ok(BehaviorRequest { kind, target, script }) = request else {
            return;
        };
        self.emit(Source::Robot, EventKind::DriveTriggered { drive, level });
        self.begin(kind, Initiator::RobotDrive(drive), None, target, script, None);
    }

    fn start_plan(&mut self, goal: Goal) {
        let label = goal.target.clone().unwrap_or_default();
        let object = if goal.needs_object() {
            self.opc.resolve_kind(&label, EntityKind::Object).ok()
        } else {
            None
        };
        let queue: VecDeque<PlannedAction> = match (goal.goal_state, &object) {
            (Some(g), Some(o)) => match self.opc.get(o).and_then(|e| e.region()) {
                Some(r) => plan(g, r).into(),
                None => VecDeque::new(),
            },
            _ => VecDeque::new(),
        };
        let behavior = match goal.kind {
            GoalKind::Give | GoalKind::Take => BehaviorKind::MoveObject,
            GoalKind::Point => BehaviorKind::ExpressKnowledge,
            GoalKind::NameAction | GoalKind::Narrate => BehaviorKind::InteractVerbally,
        };
        let deadline = self.world.tick + self.config.ticks_for(self.config.plan.timeout);
        let state = PlanState {
            goal: goal.clone(),
            label,
            object: object.clone(),
            queue,
            step: None,
            attempt: 0,
            learn_attempt: 0,
            deadline,
            closing: None,
        };
        self.begin(
            behavior,
            Initiator::HumanOrder,
            Some(goal),
            object,
            Vec::new(),
            Some(state),
        );
    }

    fn start_primitive(&mut self, p: RobotPrimitive) -> bool {
        let events = self.world.execute_primitive(p);
        let started = matches!(events.first(), Some((_, EventKind::PrimitiveStarted { .. })));
        self.emit_all(events);
        started
    }

    fn run_script(&mut self, s: &mut Script) -> Progress {
        let tick = self.world.tick;
        let reply_ticks = self.config.ticks_for(self.config.dialogue.reply_timeout).max(1);
        loop {
            if s.running {
                if self.world.is_busy() {
                    return Progress::Busy;
                }
                s.running = false;
                if s.expect.is_some() && !s.satisfied {
                    s.deadline = Some(tick + reply_ticks);
                }
            }
            if s.expect.is_some() {
                if s.satisfied {
                    s.expect = None;
                    s.satisfied = false;
                    s.deadline = None;
                    continue;
                }
                if s.deadline.is_some_and(|d| tick >= d) {
                    s.timed_out = true;
                    s.expect = None;
                    s.steps.clear();
                    return Progress::Done;
                }
                return Progress::Busy;
            }
            match s.steps.pop_front() {
                None => return Progress::Done,
                Some(ScriptStep::Do { primitive }) => {
                    if self.start_primitive(primitive) {
                        s.running = true;
                        return Progress::Busy;
                    }
                    s.primitive_failed = true;
                }
                Some(ScriptStep::Ask { text, expect }) => {
                    s.expect = Some(expect);
                    s.satisfied = false;
                    s.deadline = None;
                    if self.start_primitive(RobotPrimitive::Say(text)) {
                        s.running = true;
                        return Progress::Busy;
                    }
                    s.deadline = Some(tick + reply_ticks);
                }
            }
        }
    }

    fn advance_activity(&mut self) {
        let Some(mut act) = self.activity.take() else { return };
        if act.start_tick == self.world.tick {
            self.activity = Some(act);
            return;
        }
        // Expectations are satisfied by perception on the stored activity;
        // copy that across before running.
        let progress = self.run_script(&mut act.script);
        if let Progress::Busy = progress {
            self.activity = Some(act);
            return;
        }
        let outcome = match act.plan.take() {
            None => Some(if act.script.timed_out || act.script.primitive_failed {
                ActivityOutcome::Failure
            } else {
                ActivityOutcome::Success
            }),
            Some(mut p) => {
                let r = self.advance_plan(&mut act, &mut p);
                act.plan = Some(p);
                r
            }
        };
        match outcome {
            Some(o) => self.finish(act, o),
            None => self.activity = Some(act),
        }
    }

    /// Called whenever the plan's current script is done. Returns the
    /// outcome once the plan is over.
    fn advance_plan(&mut self, act: &mut Activity, p: &mut PlanState) -> Option<ActivityOutcome> {
        if let Some(o) = p.closing {
            return Some(o);
        }
        let max = self.config.plan.max_attempts;
        let timed_out = act.script.timed_out;
        if let Some((step, action)) = p.step.take() {
            let observed = p
                .object
                .as_deref()
                .and_then(|o| self.opc.get(o))
                .and_then(|e| e.region());
            match step {
                StepKind::PointToLearn => {
                    let learned = self.opc.resolve_kind(&p.label, EntityKind::Object).ok();
                    self.emit(
                        Source::Robot,
                        EventKind::PlanStepFinished {
                            activity: act.id,
                            step,
                            attempt: p.learn_attempt,
                            success: learned.is_some(),
                            observed: None,
                        },
                    );
                    match learned {
                        Some(o) => {
                            p.object = Some(o.clone());
                            act.target = Some(o.clone());
                            if let (Some(g), Some(r)) = (p.goal.goal_state, self.opc.get(&o).and_then(|e| e.region())) {
                                p.queue = plan(g, r).into();
                            }
                        }
                        None if p.learn_attempt >= max => return self.abandon(act, p, ActivityOutcome::Failure),
                        None => {}
                    }
                }
                StepKind::Point => {
                    self.emit(
                        Source::Robot,
                        EventKind::PlanStepFinished {
                            activity: act.id,
                            step,
                            attempt: p.attempt,
                            success: !act.script.primitive_failed,
                            observed,
                        },
                    );
                    return Some(if act.script.primitive_failed {
                        ActivityOutcome::Failure
                    } else {
                        ActivityOutcome::Success
                    });
                }
                _ => {
                    let a = action.expect("move steps carry their action");
                    let goal_state = p.goal.goal_state.expect("transfer goal");
                    let success = observed == Some(a.postcondition) || observed == Some(goal_state);
                    self.emit(
                        Source::Robot,
                        EventKind::PlanStepFinished {
                            activity: act.id,
                            step,
                            attempt: p.attempt,
                            success,
                            observed,
                        },
                    );
                    match observed {
                        Some(r) if r == goal_state => return Some(ActivityOutcome::Success),
                        Some(r) if r == a.postcondition => p.attempt = 0,
                        Some(r) if r == a.precondition => {
                            if p.attempt >= max {
                                return self.abandon(act, p, ActivityOutcome::Failure);
                            }
                            let mut retry = a;
                            retry.attempts_used = p.attempt;
                            p.queue.push_front(retry);
                        }
                        Some(r) => {
                            p.attempt = 0;
                            p.queue = plan(goal_state, r).into();
                            self.emit(
                                Source::Robot,
                                EventKind::PlanReplanned {
                                    activity: act.id,
                                    from: r,
                                    actions: p.queue.iter().copied().collect(),
                                },
                            );
                        }
                        None => return self.abandon(act, p, ActivityOutcome::Failure),
                    }
                }
            }
        }
        let _ = timed_out;
        if self.world.tick >= p.deadline {
            return self.abandon(act, p, ActivityOutcome::Interrupted);
        }
        self.next_plan_step(act, p)
    }

    fn next_plan_step(&mut self, act: &mut Activity, p: &mut PlanState) -> Option<ActivityOutcome> {
        let say = |g: &Grammar, id: &str, pairs: &[(&str, &str)]| g.say(id, pairs).expect("shipped template");
        if p.goal.needs_object() && p.object.is_none() {
            p.learn_attempt += 1;
            let text = say(&self.grammar, "ask_point", &[("object", &p.label)]);
            self.set_step(
                act,
                p,
                StepKind::PointToLearn,
                None,
                p.learn_attempt,
                vec![
                    ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Human)),
                    ScriptStep::Ask {
                        text,
                        expect: Expectation::PointAt { label: p.label.clone() },
                    },
                ],
            );
            return None;
        }
        match p.goal.kind {
            GoalKind::Give | GoalKind::Take => {
                let object = p.object.clone().expect("resolved");
                let goal_state = p.goal.goal_state.expect("transfer goal");
                if self.opc.get(&object).and_then(|e| e.region()) == Some(goal_state) {
                    return Some(ActivityOutcome::Success);
                }
                let Some(a) = p.queue.pop_front() else {
                    return Some(ActivityOutcome::Success);
                };
                p.attempt += 1;
                let step = a.action.step();
                let script = match step {
                    StepKind::RobotPush => vec![
                        ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Object(object.clone()))),
                        ScriptStep::act(RobotPrimitive::Push(object)),
                    ],
                    StepKind::RobotPull => vec![
                        ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Object(object.clone()))),
                        ScriptStep::act(RobotPrimitive::Pull(object)),
                    ],
                    _ => {
                        let id = if step == StepKind::AskPush {
                            "ask_push"
                        } else {
                            "ask_pull"
                        };
                        vec![
                            ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Human)),
                            ScriptStep::Ask {
                                text: say(&self.grammar, id, &[("object", &p.label)]),
                                expect: Expectation::RegionChange { object },
                            },
                        ]
                    }
                };
                let attempt = p.attempt;
                self.set_step(act, p, step, Some(a), attempt, script);
                None
            }
            GoalKind::Point => {
                let object = p.object.clone().expect("resolved");
                let text = say(&self.grammar, "point_reply", &[("object", &p.label)]);
                p.attempt = 1;
                self.set_step(
                    act,
                    p,
                    StepKind::Point,
                    None,
                    1,
                    vec![
                        ScriptStep::act(RobotPrimitive::PointAt(object)),
                        ScriptStep::act(RobotPrimitive::Say(text)),
                    ],
                );
                None
            }
            GoalKind::NameAction | GoalKind::Narrate => {
                let lines = match p.goal.kind {
                    GoalKind::NameAction => vec![self.name_action_reply()],
                    _ => self.narrative_reply(p.goal.query.unwrap_or(NarrativeQuery::Story)),
                };
                let mut script = vec![ScriptStep::act(RobotPrimitive::GazeAt(GazeTarget::Human))];
                script.extend(lines.into_iter().map(|l| ScriptStep::act(RobotPrimitive::Say(l))));
                act.script = Script::new(script);
                p.closing = Some(ActivityOutcome::Success);
                None
            }
        }
    }

    fn set_step(
        &mut self,
        act: &mut Activity,
        p: &mut PlanState,
        step: StepKind,
        action: Option<PlannedAction>,
        attempt: u32,
        script: Vec<ScriptStep>,
    ) {
        self.emit(
            Source::Robot,
            EventKind::PlanStepStarted {
                activity: act.id,
                step,
                attempt,
            },
        );
        p.step = Some((step, action));
        act.script = Script::new(script);
    }

    fn abandon(&mut self, act: &mut Activity, p: &mut PlanState, outcome: ActivityOutcome) -> Option<ActivityOutcome> {
        let text = if p.label.is_empty() || !p.goal.needs_object() {
            self.grammar.say("apology", &[])
        } else {
            self.grammar.say("apology_object", &[("object", &p.label)])
        }
        .expect("shipped template");
        act.script = Script::new(vec![ScriptStep::act(RobotPrimitive::Say(text))]);
        p.closing = Some(outcome);
        None
    }

    fn finish(&mut self, act: Activity, outcome: ActivityOutcome) {
        self.drives.on_behavior_end();
        match &act.plan {
            Some(_) => self.emit(
                Source::Robot,
                EventKind::PlanFinished {
                    activity: act.id,
                    outcome,
                },
            ),
            None => self.emit(
                Source::Robot,
                EventKind::BehaviorFinished {
                    activity: act.id,
                    behavior: act.behavior,
                    outcome,
                },
            ),
        };
        let post = self.snapshot_now(act.goal.clone());
        let episode = EpisodeRecord {
            id: act.id,
            session: String::new(),
            activity: act.id,
            start_tick: act.start_tick,
            end_tick: self.world.tick,
            start_s: act.start_s,
            end_s: self.world.time_s(),
            behavior: act.behavior,
            goal: act.goal.clone(),
            target: act.target.clone(),
            initiator: act.initiator,
            outcome,
            pre: act.pre,
            post,
            stream: act.stream,
            events: self.log.since(act.start_seq).to_vec(),
        };
        match self.abm.record(episode) {
            Ok(id) => {
                self.emit(Source::Robot, EventKind::EpisodeRecorded { episode: id, outcome });
            }
            Err(e) => log::error!("episode {} not recorded: {e}", act.id),
        }
        self.idle_since = self.world.tick;
    }

    fn check_task(&mut self) {
        if self.task_done || self.task_goal.is_empty() {
            return;
        }
        let done = self
            .task_goal
            .iter()
            .all(|(id, region)| self.world.object(id).is_some_and(|o| o.present && o.region == *region));
        if done {
            self.task_done = true;
            self.emit(Source::World, EventKind::TaskCompleted);
        }
    }

    // -- verbal replies ----------------------------------------------------

    fn name_action_reply(&self) -> String {
        match &self.last_action {
            Some(a) => {
                let object = self.opc.label_of(&a.object).unwrap_or("object").to_string();
                self.grammar
                    .say(
                        "action_reply",
                        &[("action", &a.label), ("object", &object), ("hand", a.hand.as_str())],
                    )
                    .expect("shipped template")
            }
            None => self.grammar.say("action_unknown", &[]).expect("shipped template"),
        }
    }

    fn story_episodes(&self) -> Vec<&EpisodeRecord> {
        self.abm
            .episodes()
            .iter()
            .filter(|e| !matches!(e.behavior, BehaviorKind::InteractVerbally | BehaviorKind::ShowLearned))
            .collect()
    }

    fn narrative_reply(&mut self, q: NarrativeQuery) -> Vec<String> {
        let eps = self.story_episodes();
        let chosen = match q {
            NarrativeQuery::Story => eps
                .iter()
                .rev()
                .find(|e| e.goal.as_ref().is_some_and(Goal::is_transfer))
                .or_else(|| eps.last())
                .map(|e| e.id),
            NarrativeQuery::Next => match self.story_cursor {
                Some(c) => eps.iter().find(|e| e.id > c).map(|e| e.id),
                None => eps.first().map(|e| e.id),
            },
            NarrativeQuery::Why => self.story_cursor.or_else(|| eps.last().map(|e| e.id)),
        };
        let Some(id) = chosen else {
            let key = if q == NarrativeQuery::Next && self.story_cursor.is_some() {
                "story_end"
            } else {
                "no_memory"
            };
            return vec![self.grammar.say(key, &[]).expect("shipped template")];
        };
        self.story_cursor = Some(id);
        let ep = self.abm.get(id).expect("episode exists");
        let g = build_igarf(&[ep]);
        match q {
            NarrativeQuery::Why => vec![why_answer(&g, ep, &self.grammar)],
            _ => narrate(&g, &self.inventory, &self.grammar, Detail::Full),
        }
    }
}

/// Sentence frames that only make sense as answers to a question.
fn is_reply(m: &Paor) -> bool {
    matches!(m.predicate.as_str(), "is" | "am")
}

fn reply_label(expect: &Expectation, m: &Paor) -> Option<(EntityId, String)> {
    let object = m.object.clone()?;
    match expect {
        Expectation::ObjectLabel { entity } if m.predicate == "is" && m.recipient.is_none() => {
            Some((entity.clone(), object))
        }
        Expectation::AgentName { entity } if m.predicate == "am" => Some((entity.clone(), object)),
        Expectation::BodyPartName { entity } if m.predicate == "is" && m.recipient.as_deref() != Some("me") => {
            Some((entity.clone(), object))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ObjectConfig;

    fn quiet() -> Config {
        Config {
            human: crate::config::HumanConfig {
                present: false,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn nothing_logged_before_first_tick() {
        let e = Engine::new(Config::default()).unwrap();
        assert!(e.log().is_empty());
        assert_eq!(e.tick(), 0);
    }

    #[test]
    fn first_trigger_medium() {
        let mut e = Engine::new(quiet()).unwrap();
        let mut trigger = None;
        for _ in 0..200 {
            for r in e.step() {
                if let EventKind::DriveTriggered { drive, .. } = r.event {
                    trigger.get_or_insert((r.tick, drive));
                }
            }
        }
        assert_eq!(trigger, Some((84, DriveKind::KnowledgeAcquisition)));
    }

    #[test]
    fn tagging_binds_label() {
        let mut e = Engine::new(quiet()).unwrap();
        let mut asked = None;
        for _ in 0..400 {
            let recs = e.step().to_vec();
            for r in &recs {
                if let EventKind::PrimitiveFinished {
                    primitive: RobotPrimitive::Say(t),
                    ..
                } = &r.event
                {
                    if t == "What is this object?" && asked.is_none() {
                        asked = Some(r.tick);
                        let gazed = match &e.world().robot.gaze {
                            Some(GazeTarget::Object(o)) => o.clone(),
                            other => panic!("gaze {other:?}"),
                        };
                        let label = e.world().object(&gazed).unwrap().true_label.clone();
                        e.submit(HumanInput::Speak {
                            text: format!("This is the {label}."),
                        });
                    }
                }
            }
        }
        assert!(asked.is_some());
        let known: Vec<_> = e.opc().iter().filter(|x| x.label.is_some()).collect();
        assert_eq!(known.len(), 1);
        let ep = &e.abm().episodes()[0];
        assert_eq!(ep.outcome, ActivityOutcome::Success);
        assert!(ep.start_tick < ep.end_tick);
    }

    #[test]
    fn take_order_with_known_label_in_shared_area() {
        let mut cfg = quiet();
        cfg.objects = vec![ObjectConfig {
            known: true,
            ..crate::config::default_objects()[1].clone()
        }];
        let mut e = Engine::new(cfg).unwrap();
        e.submit(HumanInput::Speak {
            text: "Take the cube.".into(),
        });
        e.run_for(100);
        assert_eq!(e.world().object("obj_2").unwrap().region, Region::I);
        let ep = &e.abm().episodes()[0];
        assert_eq!(ep.initiator, Initiator::HumanOrder);
        assert_eq!(ep.outcome, ActivityOutcome::Success);
    }

    #[test]
    fn unknown_speech_gets_clarification() {
        let mut e = Engine::new(quiet()).unwrap();
        e.submit(HumanInput::Speak {
            text: "flibber jab".into(),
        });
        e.run_for(30);
        assert!(e
            .log()
            .records()
            .iter()
            .any(|r| matches!(&r.event, EventKind::RobotSpoke { text } if text == "Sorry, I did not understand.")));
    }
}
