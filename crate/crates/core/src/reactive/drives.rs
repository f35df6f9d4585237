//! Homeostatic drives and the allostatic scheduler over them.
//!
//! Each drive level starts at its default, decays linearly at `n * delta`
//! per second (where `n` comes from the drive's modulator) and triggers its
//! behavior once it falls below the threshold. Starting a behavior resets
//! the triggered drive and freezes every drive until the activity ends.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::log::DriveLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveKind {
    KnowledgeAcquisition,
    KnowledgeExpression,
}

impl DriveKind {
    pub const ALL: [DriveKind; 2] = [DriveKind::KnowledgeAcquisition, DriveKind::KnowledgeExpression];

    pub fn as_str(self) -> &'static str {
        match self {
            DriveKind::KnowledgeAcquisition => "knowledge_acquisition",
            DriveKind::KnowledgeExpression => "knowledge_expression",
        }
    }
}

impl fmt::Display for DriveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub kind: DriveKind,
    pub default_level: f64,
    pub threshold: f64,
    /// Decay per modulated entity per second.
    pub delta: f64,
    /// Higher wins.
    pub priority: u32,
}

impl DriveSpec {
    pub fn acquisition() -> Self {
        Self {
            kind: DriveKind::KnowledgeAcquisition,
            default_level: 0.5,
            threshold: 0.25,
            delta: 0.01,
            priority: 2,
        }
    }

    pub fn expression() -> Self {
        Self {
            kind: DriveKind::KnowledgeExpression,
            default_level: 0.5,
            threshold: 0.25,
            delta: 0.004,
            priority: 1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 <= self.threshold && self.threshold < self.default_level && self.default_level <= 1.0) {
            return Err(format!(
                "{}: need 0 <= threshold < default_level <= 1 (got threshold {}, default {})",
                self.kind, self.threshold, self.default_level
            ));
        }
        if !(self.delta >= 0.0) {
            return Err(format!("{}: delta must be >= 0 (got {})", self.kind, self.delta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveState {
    pub level: f64,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub spec: DriveSpec,
    pub state: DriveState,
}

/// Modulator values for one tick, one per drive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulatorCounts {
    /// Present entities with missing information.
    pub incomplete: usize,
    /// Present entities without missing information.
    pub complete: usize,
}

impl ModulatorCounts {
    pub fn for_drive(&self, kind: DriveKind) -> usize {
        match kind {
            DriveKind::KnowledgeAcquisition => self.incomplete,
            DriveKind::KnowledgeExpression => self.complete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drives {
    drives: Vec<Drive>,
}

impl Drives {
    /// Drives sorted by descending priority; priorities must be distinct.
    pub fn new(specs: Vec<DriveSpec>) -> Result<Self, String> {
        let mut drives: Vec<Drive> = specs
            .into_iter()
            .map(|spec| {
                spec.validate()?;
                Ok(Drive {
                    spec,
                    state: DriveState {
                        level: spec.default_level,
                        frozen: false,
                    },
                })
            })
            .collect::<Result<_, String>>()?;
        drives.sort_by_key(|d| std::cmp::Reverse(d.spec.priority));
        if drives.windows(2).any(|w| w[0].spec.priority == w[1].spec.priority) {
            return Err("drive priorities must be distinct".into());
        }
        Ok(Self { drives })
    }

    pub fn standard() -> Self {
        Self::new(vec![DriveSpec::acquisition(), DriveSpec::expression()]).expect("valid defaults")
    }

    pub fn iter(&self) -> impl Iterator<Item = &Drive> {
        self.drives.iter()
    }

    pub fn get(&self, kind: DriveKind) -> Option<&Drive> {
        self.drives.iter().find(|d| d.spec.kind == kind)
    }

    pub fn level(&self, kind: DriveKind) -> Option<f64> {
        self.get(kind).map(|d| d.state.level)
    }

    pub fn set_level(&mut self, kind: DriveKind, level: f64) {
        if let Some(d) = self.drives.iter_mut().find(|d| d.spec.kind == kind) {
            d.state.level = level.clamp(0.0, 1.0);
        }
    }

    pub fn any_frozen(&self) -> bool {
        self.drives.iter().any(|d| d.state.frozen)
    }

    /// Linear decay of every unfrozen drive, floored at zero.
    pub fn update(&mut self, counts: ModulatorCounts, dt: f64) {
        debug_assert!(dt > 0.0);
        for d in &mut self.drives {
            if d.state.frozen {
                continue;
            }
            let n = counts.for_drive(d.spec.kind) as f64;
            d.state.level = (d.state.level - n * d.spec.delta * dt).max(0.0);
        }
    }

    /// Highest-priority unfrozen drive below its threshold, or `None` while
    /// an activity is executing.
    pub fn schedule(&self, busy: bool) -> Option<DriveKind> {
        self.schedule_eligible(busy, |_| true)
    }

    /// As [`Drives::schedule`], skipping drives whose behavior has no valid
    /// target right now.
    pub fn schedule_eligible(&self, busy: bool, eligible: impl Fn(DriveKind) -> bool) -> Option<DriveKind> {
        if busy {
            return None;
        }
        self.drives
            .iter()
            .find(|d| !d.state.frozen && d.state.level < d.spec.threshold && eligible(d.spec.kind))
            .map(|d| d.spec.kind)
    }

    /// Reset the triggering drive (if any) and freeze all drives.
    pub fn on_behavior_start(&mut self, triggered: Option<DriveKind>) {
        for d in &mut self.drives {
            if Some(d.spec.kind) == triggered {
                d.state.level = d.spec.default_level;
            }
            d.state.frozen = true;
        }
    }

    pub fn on_behavior_end(&mut self) {
        for d in &mut self.drives {
            d.state.frozen = false;
        }
    }

    pub fn levels(&self) -> Vec<DriveLevel> {
        self.drives
            .iter()
            .map(|d| DriveLevel {
                drive: d.spec.kind,
                level: d.state.level,
                frozen: d.state.frozen,
            })
            .collect()
    }
}
