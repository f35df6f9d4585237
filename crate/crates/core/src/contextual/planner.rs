//! Region state-transition graph and shortest-path planning over it.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::world::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    RobotPush,
    RobotPull,
    AskPush,
    AskPull,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::RobotPush,
        ActionKind::RobotPull,
        ActionKind::AskPush,
        ActionKind::AskPull,
    ];

    pub fn precondition(self) -> Region {
        match self {
            ActionKind::RobotPush => Region::I,
            ActionKind::RobotPull => Region::S,
            ActionKind::AskPush => Region::H,
            ActionKind::AskPull => Region::S,
        }
    }

    pub fn postcondition(self) -> Region {
        match self {
            ActionKind::RobotPush => Region::S,
            ActionKind::RobotPull => Region::I,
            ActionKind::AskPush => Region::S,
            ActionKind::AskPull => Region::H,
        }
    }

    pub fn by_robot(self) -> bool {
        matches!(self, ActionKind::RobotPush | ActionKind::RobotPull)
    }

    pub fn step(self) -> StepKind {
        match self {
            ActionKind::RobotPush => StepKind::RobotPush,
            ActionKind::RobotPull => StepKind::RobotPull,
            ActionKind::AskPush => StepKind::AskPush,
            ActionKind::AskPull => StepKind::AskPull,
        }
    }
}

/// Unit of plan execution reported in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// Ask the partner to point at an object whose label is unknown.
    PointToLearn,
    RobotPush,
    RobotPull,
    AskPush,
    AskPull,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedAction {
    pub action: ActionKind,
    pub precondition: Region,
    pub postcondition: Region,
    pub attempts_used: u32,
}

impl PlannedAction {
    pub fn new(action: ActionKind) -> Self {
        Self {
            action,
            precondition: action.precondition(),
            postcondition: action.postcondition(),
            attempts_used: 0,
        }
    }
}

/// Shortest action sequence moving an object from `current` to `goal`.
/// Every pair of regions has exactly one shortest path in this graph.
pub fn plan(goal: Region, current: Region) -> Vec<PlannedAction> {
    let mut came: BTreeMap<Region, (Region, ActionKind)> = BTreeMap::new();
    let mut queue = VecDeque::from([current]);
    while let Some(r) = queue.pop_front() {
        if r == goal {
            break;
        }
        for a in ActionKind::ALL.into_iter().filter(|a| a.precondition() == r) {
            let next = a.postcondition();
            if next != current && !came.contains_key(&next) {
                came.insert(next, (r, a));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut at = goal;
    while at != current {
        let (prev, a) = came[&at];
        path.push(PlannedAction::new(a));
        at = prev;
    }
    path.reverse();
    path
}
