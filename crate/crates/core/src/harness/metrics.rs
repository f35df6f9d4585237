//! Run metrics, computed purely from an event log.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::adaptive::EntityKind;
use crate::contextual::Initiator;
use crate::log::{BindSlot, EventKind, EventLog};

use super::diagram::{bars, Row};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Seconds until every registered object carries a label.
    pub time_all_names_known: Option<f64>,
    pub task_completion_time: Option<f64>,
    pub robot_initiated: usize,
    pub human_initiated: usize,
    /// Total bar length per diagram row, in seconds.
    pub row_durations: BTreeMap<String, f64>,
    pub duration_s: Option<f64>,
}

pub fn metrics(log: &EventLog) -> Metrics {
    let mut objects = BTreeSet::new();
    let mut labeled = BTreeSet::new();
    let mut all_known = None;
    let mut m = Metrics::default();
    for r in log.records() {
        match &r.event {
            EventKind::EntityRegistered {
                entity,
                entity_kind: EntityKind::Object,
            } => {
                objects.insert(entity.clone());
            }
            EventKind::Bound {
                entity,
                slot: BindSlot::Label,
                ..
            } if objects.contains(entity) => {
                labeled.insert(entity.clone());
            }
            EventKind::Unbound { entity, .. } => {
                labeled.remove(entity);
            }
            EventKind::TaskCompleted => {
                m.task_completion_time.get_or_insert(r.time_s);
            }
            EventKind::BehaviorStarted { initiator, .. } => match initiator {
                Initiator::RobotDrive(_) => m.robot_initiated += 1,
                Initiator::HumanOrder => m.human_initiated += 1,
            },
            EventKind::PlanStarted { .. } => m.human_initiated += 1,
            _ => {}
        }
        if all_known.is_none() && !objects.is_empty() && labeled.len() == objects.len() {
            all_known = Some(r.time_s);
        }
    }
    m.time_all_names_known = all_known;
    for b in bars(log) {
        *m.row_durations.entry(b.row.as_str().to_string()).or_default() += b.end_s - b.start_s;
    }
    for row in Row::ALL {
        m.row_durations.entry(row.as_str().to_string()).or_default();
    }
    m.duration_s = log.records().last().map(|r| r.time_s);
    if log.is_empty() {
        m.row_durations.clear();
    }
    m
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}
