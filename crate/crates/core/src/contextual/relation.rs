//! Minimal episodic relation: subject and verb, with optional object,
//! place and time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::world::Region;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Place {
    Region(Region),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub subject: String,
    pub verb: String,
    pub object: Option<String>,
    pub place: Option<Place>,
    /// Inclusive tick range.
    pub time: Option<(u64, u64)>,
}

impl Relation {
    pub fn new(subject: impl Into<String>, verb: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            verb: verb.into(),
            object: None,
            place: None,
            time: None,
        }
    }

    pub fn object(mut self, o: impl Into<String>) -> Self {
        self.object = Some(o.into());
        self
    }

    pub fn place(mut self, p: Place) -> Self {
        self.place = Some(p);
        self
    }

    pub fn at(mut self, from: u64, to: u64) -> Self {
        self.time = Some((from, to));
        self
    }

    /// Same fact, ignoring when it happened.
    pub fn same_fact(&self, other: &Relation) -> bool {
        self.subject == other.subject
            && self.verb == other.verb
            && self.object == other.object
            && self.place == other.place
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.subject, self.verb)?;
        if let Some(o) = &self.object {
            write!(f, " {o}")?;
        }
        match &self.place {
            Some(Place::Region(r)) => write!(f, " @{r}")?,
            Some(Place::Named(n)) => write!(f, " @{n}")?,
            None => {}
        }
        if let Some((a, b)) = self.time {
            write!(f, " [{a}..{b}]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_relation_has_subject_and_verb() {
        let r = Relation::new("i", "reason");
        assert_eq!(r.to_string(), "i reason");
        let full = Relation::new("toy", "is_in").place(Place::Region(Region::S)).at(3, 9);
        assert_eq!(full.to_string(), "toy is_in @S [3..9]");
        assert!(full.same_fact(&Relation::new("toy", "is_in").place(Place::Region(Region::S))));
    }
}
