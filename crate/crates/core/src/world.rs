//! Simulated tabletop world: three table regions, objects, one human partner
//! and the robot's embodiment.
//!
//! The world is a deterministic discrete-time stepper. It knows nothing about
//! drives, language or memory; it only moves objects, runs robot primitives to
//! completion and turns human inputs into events.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::log::{EventKind, Source};

// ---------------------------------------------------------------------------
// Regions and geometry
// ---------------------------------------------------------------------------

/// Table areas: robot-only, shared and human-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    I,
    S,
    H,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::I, Region::S, Region::H];

    /// Band index along the table depth, robot side first.
    fn band(self) -> usize {
        match self {
            Region::I => 0,
            Region::S => 1,
            Region::H => 2,
        }
    }

    pub fn human_reachable(self) -> bool {
        matches!(self, Region::S | Region::H)
    }

    pub fn robot_reachable(self) -> bool {
        matches!(self, Region::I | Region::S)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::I => "I",
            Region::S => "S",
            Region::H => "H",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" | "i" => Ok(Region::I),
            "S" | "s" => Ok(Region::S),
            "H" | "h" => Ok(Region::H),
            other => Err(format!("unknown region `{other}` (expected I, S or H)")),
        }
    }
}

/// Table rectangle in the table frame. `y` runs from the robot edge (0) to
/// the human edge (`depth`); the three regions are equal bands along `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableGeometry {
    pub width: f64,
    pub depth: f64,
}

impl Default for TableGeometry {
    fn default() -> Self {
        Self { width: 1.2, depth: 0.9 }
    }
}

impl TableGeometry {
    fn band_depth(&self) -> f64 {
        self.depth / 3.0
    }

    /// Region containing a table position. Band boundaries belong to the band
    /// further from the robot; the far edge belongs to `H`.
    pub fn region_of(&self, position: [f64; 2]) -> Option<Region> {
        let [x, y] = position;
        if !(0.0..=self.width).contains(&x) || !(0.0..=self.depth).contains(&y) {
            return None;
        }
        let band = (y / self.band_depth()).floor() as usize;
        Some(match band.min(2) {
            0 => Region::I,
            1 => Region::S,
            _ => Region::H,
        })
    }

    pub fn center_y(&self, region: Region) -> f64 {
        (region.band() as f64 + 0.5) * self.band_depth()
    }
}

// ---------------------------------------------------------------------------
// World contents
// ---------------------------------------------------------------------------

pub type ObjectId = String;
pub type JointId = u32;
pub type TactileId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub id: ObjectId,
    /// Ground truth name, hidden from the robot.
    pub true_label: String,
    pub region: Region,
    pub position: [f64; 2],
    pub dimensions: [f64; 2],
    pub present: bool,
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn as_str(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hands {
    pub left: [f64; 2],
    pub right: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimHuman {
    pub present: bool,
    /// Hidden from the robot; used by the face oracle as identity key.
    pub true_name: String,
    pub pointing_at: Option<ObjectId>,
    pub last_utterance: Option<String>,
    pub hands: Hands,
}

/// One of the robot's own body parts (a finger joint with a skin patch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyPart {
    pub joint: JointId,
    pub tactile: TactileId,
    /// Hidden from the robot; scripted partners use it to answer.
    pub true_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "target", content = "id", rename_all = "snake_case")]
pub enum GazeTarget {
    Human,
    Object(ObjectId),
    BodyPart(JointId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "primitive", content = "arg", rename_all = "snake_case")]
pub enum RobotPrimitive {
    /// I to S.
    Push(ObjectId),
    /// S to I.
    Pull(ObjectId),
    PointAt(ObjectId),
    GazeAt(GazeTarget),
    Say(String),
    MoveBodyPart(JointId),
    RaiseHand,
}

impl RobotPrimitive {
    pub fn name(&self) -> &'static str {
        match self {
            RobotPrimitive::Push(_) => "push",
            RobotPrimitive::Pull(_) => "pull",
            RobotPrimitive::PointAt(_) => "point_at",
            RobotPrimitive::GazeAt(_) => "gaze_at",
            RobotPrimitive::Say(_) => "say",
            RobotPrimitive::MoveBodyPart(_) => "move_body_part",
            RobotPrimitive::RaiseHand => "raise_hand",
        }
    }

    pub fn is_manipulation(&self) -> bool {
        matches!(self, RobotPrimitive::Push(_) | RobotPrimitive::Pull(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivePrimitive {
    pub primitive: RobotPrimitive,
    pub started_tick: u64,
    pub remaining_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRobot {
    pub active: Option<ActivePrimitive>,
    pub gaze: Option<GazeTarget>,
    pub hand_raised: bool,
    pub moving_joint: Option<JointId>,
    pub body_parts: Vec<BodyPart>,
}

/// Inputs a human partner (scripted or live) can produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HumanInput {
    Speak {
        text: String,
    },
    PointAt {
        object: ObjectId,
    },
    MoveObject {
        object: ObjectId,
        from: Region,
        to: Region,
    },
    TouchBodyPart {
        joint: JointId,
    },
    PerformAction {
        action: String,
        object: ObjectId,
        hand: Hand,
    },
}

/// Duration of each primitive, in simulated seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrimitiveDurations {
    pub point: f64,
    pub push: f64,
    pub pull: f64,
    pub say_per_word: f64,
    pub body_part_move: f64,
    pub gaze: f64,
    pub raise_hand: f64,
}

impl Default for PrimitiveDurations {
    fn default() -> Self {
        Self {
            point: 2.0,
            push: 4.0,
            pull: 4.0,
            say_per_word: 0.5,
            body_part_move: 3.0,
            gaze: 0.5,
            raise_hand: 1.0,
        }
    }
}

impl PrimitiveDurations {
    pub fn seconds(&self, p: &RobotPrimitive) -> f64 {
        match p {
            RobotPrimitive::Push(_) => self.push,
            RobotPrimitive::Pull(_) => self.pull,
            RobotPrimitive::PointAt(_) => self.point,
            RobotPrimitive::GazeAt(_) => self.gaze,
            RobotPrimitive::Say(text) => self.say_per_word * text.split_whitespace().count() as f64,
            RobotPrimitive::MoveBodyPart(_) => self.body_part_move,
            RobotPrimitive::RaiseHand => self.raise_hand,
        }
    }
}

pub type Emitted = Vec<(Source, EventKind)>;

// ---------------------------------------------------------------------------
// World state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub tick_length: f64,
    pub geometry: TableGeometry,
    pub objects: Vec<SimObject>,
    pub human: SimHuman,
    pub robot: SimRobot,
    pub rng_seed: u64,
    pub durations: PrimitiveDurations,
    pub failure_probability: f64,
    #[serde(skip, default = "default_rng")]
    rng: ChaCha8Rng,
}

fn default_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl WorldState {
    pub fn new(
        tick_length: f64,
        geometry: TableGeometry,
        objects: Vec<SimObject>,
        human: SimHuman,
        body_parts: Vec<BodyPart>,
        rng_seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(1);
        Self {
            tick: 0,
            tick_length,
            geometry,
            objects,
            human,
            robot: SimRobot {
                active: None,
                gaze: None,
                hand_raised: false,
                moving_joint: None,
                body_parts,
            },
            rng_seed,
            durations: PrimitiveDurations::default(),
            failure_probability: 0.0,
            rng,
        }
    }

    pub fn time_s(&self) -> f64 {
        self.tick as f64 * self.tick_length
    }

    pub fn object(&self, id: &str) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn object_mut(&mut self, id: &str) -> Option<&mut SimObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn body_part(&self, joint: JointId) -> Option<&BodyPart> {
        self.robot.body_parts.iter().find(|b| b.joint == joint)
    }

    pub fn is_busy(&self) -> bool {
        self.robot.active.is_some()
    }

    fn seconds_to_ticks(&self, seconds: f64) -> u64 {
        ((seconds / self.tick_length).round() as u64).max(1)
    }

    /// Advance one tick: drain human inputs in arrival order, then progress
    /// the active primitive.
    pub fn step(&mut self, queued_inputs: Vec<HumanInput>) -> Emitted {
        self.tick += 1;
        for o in &mut self.objects {
            o.velocity = [0.0, 0.0];
        }
        let mut out = Vec::new();
        for input in queued_inputs {
            out.extend(self.apply_human_input(input));
        }
        out.extend(self.progress_primitive());
        out
    }

    pub fn apply_human_input(&mut self, input: HumanInput) -> Emitted {
        let reject = |input: HumanInput, reason: &str| {
            vec![(
                Source::Human,
                EventKind::RejectedInput {
                    input,
                    reason: reason.to_string(),
                },
            )]
        };
        match input {
            HumanInput::Speak { text } => {
                self.human.last_utterance = Some(text.clone());
                vec![(Source::Human, EventKind::HumanSpoke { text })]
            }
            HumanInput::PointAt { ref object } => match self.object(object) {
                Some(o) if o.present => {
                    let object = object.clone();
                    self.human.pointing_at = Some(object.clone());
                    vec![(Source::Human, EventKind::HumanPointed { object })]
                }
                _ => reject(input, "no such present object"),
            },
            HumanInput::MoveObject { ref object, from, to } => {
                if !(from.human_reachable() && to.human_reachable()) || from == to {
                    return reject(input, "human can only move objects between H and S");
                }
                match self.object(object) {
                    Some(o) if o.present && o.region == from => {
                        let object = object.clone();
                        out_move(self, &object, to, Source::Human)
                    }
                    Some(o) if o.present => reject(input, "object is not in the stated region"),
                    _ => reject(input, "no such present object"),
                }
            }
            HumanInput::TouchBodyPart { joint } => match self.body_part(joint) {
                Some(b) => {
                    let tactile = b.tactile;
                    vec![(Source::Human, EventKind::HumanTouched { joint, tactile })]
                }
                None => reject(input, "no such body part"),
            },
            HumanInput::PerformAction {
                ref action,
                ref object,
                hand,
            } => match self.object(object) {
                Some(o) if o.present => {
                    let (action, object) = (action.clone(), object.clone());
                    vec![(Source::Human, EventKind::HumanActed { action, object, hand })]
                }
                _ => reject(input, "no such present object"),
            },
        }
    }

    fn primitive_precondition(&self, p: &RobotPrimitive) -> Result<(), &'static str> {
        let needs = |id: &str, region: Option<Region>| match self.object(id) {
            Some(o) if o.present => match region {
                Some(r) if o.region != r => Err("object not in required region"),
                _ => Ok(()),
            },
            _ => Err("no such present object"),
        };
        match p {
            RobotPrimitive::Push(id) => needs(id, Some(Region::I)),
            RobotPrimitive::Pull(id) => needs(id, Some(Region::S)),
            RobotPrimitive::PointAt(id) => needs(id, None),
            RobotPrimitive::GazeAt(GazeTarget::Object(id)) => needs(id, None),
            RobotPrimitive::GazeAt(GazeTarget::BodyPart(j)) | RobotPrimitive::MoveBodyPart(j) => {
                self.body_part(*j).map(|_| ()).ok_or("no such body part")
            }
            RobotPrimitive::GazeAt(GazeTarget::Human) => Ok(()),
            RobotPrimitive::Say(_) | RobotPrimitive::RaiseHand => Ok(()),
        }
    }

    /// Start a primitive. It occupies its configured duration; a violated
    /// precondition finishes it immediately with `success = false`.
    pub fn execute_primitive(&mut self, p: RobotPrimitive) -> Emitted {
        if self.robot.active.is_some() {
            return vec![(
                Source::Robot,
                EventKind::PrimitiveFinished {
                    primitive: p,
                    success: false,
                },
            )];
        }
        if self.primitive_precondition(&p).is_err() {
            return vec![(
                Source::Robot,
                EventKind::PrimitiveFinished {
                    primitive: p,
                    success: false,
                },
            )];
        }
        let mut out = vec![(Source::Robot, EventKind::PrimitiveStarted { primitive: p.clone() })];
        match &p {
            RobotPrimitive::GazeAt(t) => self.robot.gaze = Some(t.clone()),
            RobotPrimitive::PointAt(id) => self.robot.gaze = Some(GazeTarget::Object(id.clone())),
            RobotPrimitive::MoveBodyPart(j) => self.robot.moving_joint = Some(*j),
            RobotPrimitive::Say(text) => out.push((Source::Robot, EventKind::RobotSpoke { text: text.clone() })),
            RobotPrimitive::Push(_) | RobotPrimitive::Pull(_) => self.robot.hand_raised = false,
            RobotPrimitive::RaiseHand => {}
        }
        let remaining_ticks = self.seconds_to_ticks(self.durations.seconds(&p));
        self.robot.active = Some(ActivePrimitive {
            primitive: p,
            started_tick: self.tick,
            remaining_ticks,
        });
        out
    }

    fn progress_primitive(&mut self) -> Emitted {
        let Some(active) = self.robot.active.as_mut() else {
            return Vec::new();
        };
        active.remaining_ticks = active.remaining_ticks.saturating_sub(1);
        if active.remaining_ticks > 0 {
            return Vec::new();
        }
        let primitive = self.robot.active.take().expect("active primitive").primitive;
        let mut out = Vec::new();
        let success = match &primitive {
            RobotPrimitive::Push(id) | RobotPrimitive::Pull(id) => {
                let (from, to) = match primitive {
                    RobotPrimitive::Push(_) => (Region::I, Region::S),
                    _ => (Region::S, Region::I),
                };
                // Drawn unconditionally so the stream does not depend on
                // where the object happens to be.
                let failed = self.rng.gen::<f64>() < self.failure_probability;
                let still_there = self.object(id).is_some_and(|o| o.present && o.region == from);
                if still_there && !failed {
                    let id = id.clone();
                    out.extend(out_move(self, &id, to, Source::Robot));
                    true
                } else {
                    false
                }
            }
            RobotPrimitive::MoveBodyPart(_) => {
                self.robot.moving_joint = None;
                true
            }
            RobotPrimitive::RaiseHand => {
                self.robot.hand_raised = true;
                true
            }
            _ => true,
        };
        out.push((Source::Robot, EventKind::PrimitiveFinished { primitive, success }));
        out
    }

    /// Every on-table object lies inside the table and its region matches its
    /// position.
    pub fn check_consistency(&self) -> Result<(), String> {
        for o in &self.objects {
            if o.dimensions.iter().any(|d| *d <= 0.0) {
                return Err(format!("object {} has non-positive dimensions", o.id));
            }
            match self.geometry.region_of(o.position) {
                Some(r) if r == o.region => {}
                other => {
                    return Err(format!(
                        "object {} region {} inconsistent with position {:?} ({:?})",
                        o.id, o.region, o.position, other
                    ))
                }
            }
        }
        if let Some(p) = &self.human.pointing_at {
            if !self.object(p).is_some_and(|o| o.present) {
                return Err(format!("human points at absent object {p}"));
            }
        }
        Ok(())
    }
}

fn out_move(world: &mut WorldState, id: &str, to: Region, by: Source) -> Emitted {
    let geometry = world.geometry;
    let dt = world.tick_length;
    let obj = world.object_mut(id).expect("object exists");
    let from = obj.region;
    let new_y = geometry.center_y(to);
    obj.velocity = [0.0, (new_y - obj.position[1]) / dt];
    obj.position[1] = new_y;
    obj.region = to;
    vec![(
        by,
        EventKind::ObjectMoved {
            object: id.to_string(),
            from,
            to,
        },
    )]
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
