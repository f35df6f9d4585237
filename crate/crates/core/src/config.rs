//! Scenario configuration, read from TOML.
//!
//! Every section is optional; an empty file yields the default three-object
//! table with one partner. Errors carry the line of the offending key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive::{ConfusionMatrix, SaliencyParams};
use crate::reactive::{DriveKind, DriveSpec};
use crate::world::{
    BodyPart, Hands, HumanInput, JointId, PrimitiveDurations, Region, SimHuman, SimObject, TableGeometry, TactileId,
    WorldState,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{}: {message}", path.as_ref().map(|p| format!("{}:", p.display())).unwrap_or_default(), line.map(|l| format!("line {l}")).unwrap_or_else(|| "config".into()))]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn field(source: &str, field: &str, message: impl Into<String>) -> Self {
        Self {
            path: None,
            line: find_key_line(source, field),
            field: Some(field.to_string()),
            message: format!("{field}: {}", message.into()),
        }
    }
}

// ---------------------------------------------------------------------------
// Sections
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Slow,
    #[default]
    Medium,
    Fast,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Slow, Condition::Medium, Condition::Fast];

    /// Multiplier applied to the medium decay rates.
    pub fn factor(self) -> f64 {
        match self {
            Condition::Slow => 1.0 / 2.5,
            Condition::Medium => 1.0,
            Condition::Fast => 2.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Slow => "slow",
            Condition::Medium => "medium",
            Condition::Fast => "fast",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "slow" => Ok(Condition::Slow),
            "medium" => Ok(Condition::Medium),
            "fast" => Ok(Condition::Fast),
            other => Err(format!("unknown condition `{other}` (expected slow, medium or fast)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanConfig {
    pub present: bool,
    pub name: String,
    /// Start with the partner's name already in memory.
    pub known: bool,
}

impl Default for HumanConfig {
    fn default() -> Self {
        Self {
            present: true,
            name: "Daniel".into(),
            known: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub id: String,
    pub label: String,
    pub region: Region,
    /// Position across the table; defaults to evenly spaced.
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default = "default_dimensions")]
    pub dimensions: [f64; 2],
    #[serde(default = "yes")]
    pub present: bool,
    /// Start with the label already in memory.
    #[serde(default)]
    pub known: bool,
}

fn default_dimensions() -> [f64; 2] {
    [0.08, 0.08]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyPartConfig {
    pub joint: JointId,
    pub tactile: TactileId,
    pub name: String,
    #[serde(default)]
    pub known: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveOverride {
    pub delta: Option<f64>,
    pub default_level: Option<f64>,
    pub threshold: Option<f64>,
    pub priority: Option<u32>,
}

impl DriveOverride {
    fn apply(&self, mut spec: DriveSpec, factor: f64) -> DriveSpec {
        spec.delta = self.delta.unwrap_or(spec.delta) * factor;
        spec.default_level = self.default_level.unwrap_or(spec.default_level);
        spec.threshold = self.threshold.unwrap_or(spec.threshold);
        spec.priority = self.priority.unwrap_or(spec.priority);
        spec
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrivesConfig {
    pub acquisition: DriveOverride,
    pub expression: DriveOverride,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognitionConfig {
    pub face_miss_rate: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DialogueConfig {
    /// Seconds to wait for an answer after a question has been spoken.
    pub reply_timeout: f64,
}

impl Default for DialogueConfig {
    fn default() -> Self {
        Self { reply_timeout: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    /// Attempts per planned action before the plan is abandoned.
    pub max_attempts: u32,
    /// Whole-plan limit in seconds.
    pub timeout: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            timeout: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbmConfig {
    /// Seconds between stream samples inside an episode.
    pub stream_period: f64,
    /// Directory for on-disk memory; in memory only when absent.
    pub dir: Option<PathBuf>,
    pub session: Option<String>,
}

impl Default for AbmConfig {
    fn default() -> Self {
        Self {
            stream_period: 1.0,
            dir: None,
            session: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    /// Target region per true object label.
    pub goal: BTreeMap<String, Region>,
    pub stop_on_complete: bool,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            goal: BTreeMap::from([
                ("octopus".to_string(), Region::I),
                ("cube".to_string(), Region::H),
                ("duck".to_string(), Region::H),
            ]),
            stop_on_complete: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Cooperative,
    TaskDriven,
    Silent,
    /// Only the timed script.
    Script,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Cooperative => "cooperative",
            PolicyKind::TaskDriven => "task_driven",
            PolicyKind::Silent => "silent",
            PolicyKind::Script => "script",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cooperative" => Ok(PolicyKind::Cooperative),
            "task_driven" => Ok(PolicyKind::TaskDriven),
            "silent" => Ok(PolicyKind::Silent),
            "script" => Ok(PolicyKind::Script),
            other => Err(format!("unknown human policy `{other}`")),
        }
    }
}

/// One timed input. Either `tick` or `t` (seconds) must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub input: HumanInput,
}

impl ScriptEntry {
    pub fn at_tick(tick: u64, input: HumanInput) -> Self {
        Self {
            tick: Some(tick),
            t: None,
            input,
        }
    }

    pub fn due_tick(&self, tick_length: f64) -> u64 {
        match (self.tick, self.t) {
            (Some(t), _) => t,
            (None, Some(s)) => (s / tick_length).round() as u64,
            (None, None) => 0,
        }
    }
}

/// A script stored on its own, as written by live sessions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFile {
    #[serde(default, rename = "input")]
    pub inputs: Vec<ScriptEntry>,
}

impl ScriptFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            field: None,
            message: e.to_string(),
        })?;
        toml::from_str(&text).map_err(|e| {
            let mut err = toml_error(&text, &e);
            err.path = Some(path.to_path_buf());
            err
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scripts serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Seconds between the end of the robot's question and the reply.
    pub latency: f64,
    /// Seconds the robot must be idle before a task-driven partner speaks.
    pub idle_before_order: f64,
    /// Timed inputs played on top of the chosen policy.
    pub script: Vec<ScriptEntry>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Cooperative,
            latency: 2.0,
            idle_before_order: 2.0,
            script: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Top level
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub name: String,
    pub seed: u64,
    pub tick_length: f64,
    /// Tick budget for a run.
    pub ticks: u64,
    pub condition: Condition,
    pub table: TableGeometry,
    pub human: HumanConfig,
    #[serde(rename = "object")]
    pub objects: Vec<ObjectConfig>,
    #[serde(rename = "body_part")]
    pub body_parts: Vec<BodyPartConfig>,
    pub durations: PrimitiveDurations,
    pub failure_probability: f64,
    pub drives: DrivesConfig,
    pub saliency: SaliencyParams,
    pub recognition: RecognitionConfig,
    pub dialogue: DialogueConfig,
    pub plan: PlanConfig,
    pub abm: AbmConfig,
    pub task: Option<TaskConfig>,
    pub policy: PolicyConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 42,
            tick_length: 0.1,
            ticks: 6000,
            condition: Condition::Medium,
            table: TableGeometry::default(),
            human: HumanConfig::default(),
            objects: default_objects(),
            body_parts: Vec::new(),
            durations: PrimitiveDurations::default(),
            failure_probability: 0.0,
            drives: DrivesConfig::default(),
            saliency: SaliencyParams::default(),
            recognition: RecognitionConfig::default(),
            dialogue: DialogueConfig::default(),
            plan: PlanConfig::default(),
            abm: AbmConfig::default(),
            task: None,
            policy: PolicyConfig::default(),
        }
    }
}

/// Octopus in the partner's area, cube shared, duck on the robot's side.
pub fn default_objects() -> Vec<ObjectConfig> {
    [
        ("obj_1", "octopus", Region::H),
        ("obj_2", "cube", Region::S),
        ("obj_3", "duck", Region::I),
    ]
    .into_iter()
    .map(|(id, label, region)| ObjectConfig {
        id: id.into(),
        label: label.into(),
        region,
        x: None,
        dimensions: default_dimensions(),
        present: true,
        known: false,
    })
    .collect()
}

/// Five named fingers of the left hand, on joints 11 to 15.
pub fn default_body_parts() -> Vec<BodyPartConfig> {
    ["thumb", "index", "middle", "ring", "little"]
        .into_iter()
        .enumerate()
        .map(|(i, name)| BodyPartConfig {
            joint: 11 + i as JointId,
            tactile: 101 + i as TactileId,
            name: name.into(),
            known: false,
        })
        .collect()
}

impl Config {
    pub fn from_toml(source: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(source).map_err(|e| toml_error(source, &e))?;
        cfg.validate(source)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            field: None,
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|mut e| {
            e.path = Some(path.to_path_buf());
            e
        })?;
        if let Some(dir) = cfg.abm.dir.as_mut().filter(|d| d.is_relative()) {
            if let Some(parent) = path.parent() {
                *dir = parent.join(&*dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self, source: &str) -> Result<(), ConfigError> {
        let err = |field: &str, msg: String| Err(ConfigError::field(source, field, msg));
        if !(self.tick_length > 0.0) {
            return err("tick_length", format!("must be > 0 (got {})", self.tick_length));
        }
        if !(0.0..=1.0).contains(&self.failure_probability) {
            return err("failure_probability", "must be within [0, 1]".into());
        }
        for spec in self.drive_specs().iter() {
            if let Err(e) = spec.validate() {
                let field = if e.contains("delta") { "delta" } else { "threshold" };
                return err(field, e);
            }
        }
        if self.drive_specs()[0].priority == self.drive_specs()[1].priority {
            return err("priority", "drive priorities must be distinct".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return err("id", format!("duplicate object id `{}`", o.id));
            }
            if o.label.trim().is_empty() {
                return err("label", format!("object `{}` has an empty label", o.id));
            }
            if o.dimensions.iter().any(|d| !(*d > 0.0)) {
                return err("dimensions", format!("object `{}` needs positive dimensions", o.id));
            }
            if let Some(x) = o.x {
                if !(0.0..=self.table.width).contains(&x) {
                    return err("x", format!("object `{}` lies outside the table", o.id));
                }
            }
        }
        let mut joints = std::collections::BTreeSet::new();
        for b in &self.body_parts {
            if !joints.insert(b.joint) {
                return err("joint", format!("duplicate joint {}", b.joint));
            }
        }
        if !(self.dialogue.reply_timeout > 0.0) {
            return err("reply_timeout", "must be > 0".into());
        }
        if self.plan.max_attempts == 0 {
            return err("max_attempts", "must be at least 1".into());
        }
        if !(self.abm.stream_period > 0.0) {
            return err("stream_period", "must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.recognition.face_miss_rate) {
            return err("face_miss_rate", "must be within [0, 1]".into());
        }
        if let Err(e) = self.recognition.confusion.validate() {
            return err("confusion", e.to_string());
        }
        if let Some(task) = &self.task {
            for label in task.goal.keys() {
                if !self.objects.iter().any(|o| &o.label == label) {
                    return err("goal", format!("task names unknown object `{label}`"));
                }
            }
        }
        for s in &self.policy.script {
            if s.tick.is_none() && s.t.is_none() {
                return err("script", "every script entry needs `tick` or `t`".into());
            }
        }
        Ok(())
    }

    /// Drive specs with the condition factor applied, acquisition first.
    pub fn drive_specs(&self) -> [DriveSpec; 2] {
        let f = self.condition.factor();
        [
            self.drives.acquisition.apply(DriveSpec::acquisition(), f),
            self.drives.expression.apply(DriveSpec::expression(), f),
        ]
    }

    pub fn drive_spec(&self, kind: DriveKind) -> DriveSpec {
        let [a, e] = self.drive_specs();
        match kind {
            DriveKind::KnowledgeAcquisition => a,
            DriveKind::KnowledgeExpression => e,
        }
    }

    pub fn ticks_for(&self, seconds: f64) -> u64 {
        (seconds / self.tick_length).round().max(0.0) as u64
    }

    pub fn build_world(&self) -> WorldState {
        let g = self.table;
        let n = self.objects.len().max(1) as f64;
        let objects = self
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| SimObject {
                id: o.id.clone(),
                true_label: o.label.clone(),
                region: o.region,
                position: [o.x.unwrap_or(g.width * (i as f64 + 0.5) / n), g.center_y(o.region)],
                dimensions: o.dimensions,
                present: o.present,
                velocity: [0.0, 0.0],
            })
            .collect();
        let hy = g.depth + 0.2;
        let human = SimHuman {
            present: self.human.present,
            true_name: self.human.name.clone(),
            pointing_at: None,
            last_utterance: None,
            hands: Hands {
                left: [g.width * 0.35, hy],
                right: [g.width * 0.65, hy],
            },
        };
        let body_parts = self
            .body_parts
            .iter()
            .map(|b| BodyPart {
                joint: b.joint,
                tactile: b.tactile,
                true_name: b.name.clone(),
            })
            .collect();
        let mut w = WorldState::new(self.tick_length, g, objects, human, body_parts, self.seed);
        w.durations = self.durations;
        w.failure_probability = self.failure_probability;
        w
    }
}

fn toml_error(source: &str, e: &toml::de::Error) -> ConfigError {
    let line = e
        .span()
        .map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1);
    ConfigError {
        path: None,
        line,
        field: None,
        message: e.message().to_string(),
    }
}

/// First line assigning `key` (the last segment of a dotted field).
fn find_key_line(source: &str, field: &str) -> Option<usize> {
    let key = field.rsplit('.').next().unwrap_or(field);
    source
        .lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}
