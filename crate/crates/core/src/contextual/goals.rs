//! Mapping from parsed orders and queries to goals.

use serde::{Deserialize, Serialize};

use crate::adaptive::Paor;
use crate::world::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    Give,
    Take,
    Point,
    NameAction,
    Narrate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NarrativeQuery {
    Story,
    Next,
    Why,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Goal {
    pub kind: GoalKind,
    /// Label of the entity the goal is about, as spoken.
    pub target: Option<String>,
    pub goal_state: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<NarrativeQuery>,
}

impl Goal {
    pub fn give(label: &str) -> Self {
        Self {
            kind: GoalKind::Give,
            target: Some(label.to_string()),
            goal_state: Some(Region::H),
            query: None,
        }
    }

    pub fn take(label: &str) -> Self {
        Self {
            kind: GoalKind::Take,
            target: Some(label.to_string()),
            goal_state: Some(Region::I),
            query: None,
        }
    }

    pub fn point(label: &str) -> Self {
        Self {
            kind: GoalKind::Point,
            target: Some(label.to_string()),
            goal_state: None,
            query: None,
        }
    }

    pub fn name_action() -> Self {
        Self {
            kind: GoalKind::NameAction,
            target: Some("action".into()),
            goal_state: None,
            query: None,
        }
    }

    pub fn narrate(query: NarrativeQuery) -> Self {
        Self {
            kind: GoalKind::Narrate,
            target: None,
            goal_state: None,
            query: Some(query),
        }
    }

    /// Goals that move an object and therefore run the region planner.
    pub fn is_transfer(&self) -> bool {
        matches!(self.kind, GoalKind::Give | GoalKind::Take)
    }

    /// Whether the goal needs its target label resolved to an object.
    pub fn needs_object(&self) -> bool {
        matches!(self.kind, GoalKind::Give | GoalKind::Take | GoalKind::Point)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GoalError {
    #[error("`{0}` is not something I can do")]
    Unmapped(String),
    #[error("order `{0}` needs an object")]
    MissingObject(String),
}

pub fn goal_from_meaning(p: &Paor) -> Result<Goal, GoalError> {
    let object = || {
        p.object
            .clone()
            .ok_or_else(|| GoalError::MissingObject(p.predicate.clone()))
    };
    match p.predicate.as_str() {
        "give" => Ok(Goal::give(&object()?)),
        "take" => Ok(Goal::take(&object()?)),
        "point" => Ok(Goal::point(&object()?)),
        "call" if p.object.as_deref() == Some("action") => Ok(Goal::name_action()),
        "narrate" => Ok(Goal::narrate(NarrativeQuery::Story)),
        "narrate_next" => Ok(Goal::narrate(NarrativeQuery::Next)),
        "narrate_why" => Ok(Goal::narrate(NarrativeQuery::Why)),
        other => Err(GoalError::Unmapped(other.to_string())),
    }
}
