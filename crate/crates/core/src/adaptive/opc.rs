//! Object property collector: one record per world referent, binding its
//! perceptual payload to an optional linguistic label.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::log::BindSlot;
use crate::reactive::ModulatorCounts;
use crate::world::{JointId, ObjectId, Region, TactileId};

pub type EntityId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Object,
    Agent,
    BodyPart,
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Object {
        object: ObjectId,
        region: Region,
        position: [f64; 2],
        dimensions: [f64; 2],
    },
    Agent {
        face_signature: String,
    },
    BodyPart {
        joint: JointId,
        tactile: Option<TactileId>,
    },
    Action {
        classifier_signature: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub label: Option<String>,
    pub present: bool,
    pub saliency: f64,
    pub payload: Payload,
}

impl Entity {
    /// Checklist: objects, agents and actions need a label; body parts need
    /// a label and a tactile link.
    pub fn missing_information(&self) -> bool {
        match &self.payload {
            Payload::BodyPart { tactile, .. } => self.label.is_none() || tactile.is_none(),
            _ => self.label.is_none(),
        }
    }

    /// Entities that take part in the drive modulators. Actions are
    /// momentary and never count as part of the scene.
    pub fn in_scene(&self) -> bool {
        self.present && self.kind != EntityKind::Action
    }

    pub fn object_id(&self) -> Option<&str> {
        match &self.payload {
            Payload::Object { object, .. } => Some(object),
            _ => None,
        }
    }

    pub fn region(&self) -> Option<Region> {
        match &self.payload {
            Payload::Object { region, .. } => Some(*region),
            _ => None,
        }
    }

    pub fn joint(&self) -> Option<JointId> {
        match &self.payload {
            Payload::BodyPart { joint, .. } => Some(*joint),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Binding {
    Label(String),
    Touch(TactileId),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BindOutcome {
    /// False when the binding was already in place.
    pub changed: bool,
    /// Previous label, when a different one was overwritten.
    pub retagged_from: Option<String>,
    /// Another entity that held the same label and lost it.
    pub displaced: Option<EntityId>,
}

impl BindOutcome {
    pub fn slot(binding: &Binding) -> BindSlot {
        match binding {
            Binding::Label(_) => BindSlot::Label,
            Binding::Touch(_) => BindSlot::Touch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OpcError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(EntityId),
    #[error("empty label")]
    EmptyLabel,
    #[error("entity `{0}` has no tactile slot")]
    NotABodyPart(EntityId),
    #[error("no known entity is called `{0}`")]
    UnknownLabel(String),
}

fn same_label(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Opc {
    entities: BTreeMap<EntityId, Entity>,
}

impl Opc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity: Entity) {
        self.entities.insert(entity.id.clone(), entity);
    }

    pub fn get(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Entity> {
        self.entities.get_mut(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Entity> {
        self.entities.values_mut()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity_for_object(&self, object: &str) -> Option<&Entity> {
        self.entities.values().find(|e| e.object_id() == Some(object))
    }

    pub fn entity_for_joint(&self, joint: JointId) -> Option<&Entity> {
        self.entities.values().find(|e| e.joint() == Some(joint))
    }

    pub fn modulator_counts(&self) -> ModulatorCounts {
        let mut c = ModulatorCounts::default();
        for e in self.entities.values().filter(|e| e.in_scene()) {
            if e.missing_information() {
                c.incomplete += 1;
            } else {
                c.complete += 1;
            }
        }
        c
    }

    /// Attach a label or tactile link. Identical rebinding is a no-op; a
    /// different label overwrites the old one (last write wins) and any other
    /// entity holding the same label loses it, keeping lookup injective.
    pub fn bind(&mut self, id: &str, binding: Binding) -> Result<BindOutcome, OpcError> {
        if !self.entities.contains_key(id) {
            return Err(OpcError::UnknownEntity(id.to_string()));
        }
        match binding {
            Binding::Label(label) => {
                let label = label.trim().to_string();
                if label.is_empty() {
                    return Err(OpcError::EmptyLabel);
                }
                let entity = &self.entities[id];
                if entity.label.as_deref().is_some_and(|l| l == label) {
                    return Ok(BindOutcome::default());
                }
                let retagged_from = entity.label.clone();
                let displaced = self
                    .entities
                    .values()
                    .find(|e| e.id != id && e.label.as_deref().is_some_and(|l| same_label(l, &label)))
                    .map(|e| e.id.clone());
                if let Some(other) = &displaced {
                    self.entities.get_mut(other).expect("exists").label = None;
                }
                self.entities.get_mut(id).expect("exists").label = Some(label);
                Ok(BindOutcome {
                    changed: true,
                    retagged_from,
                    displaced,
                })
            }
            Binding::Touch(t) => {
                let entity = self.entities.get_mut(id).expect("exists");
                match &mut entity.payload {
                    Payload::BodyPart { tactile, .. } => {
                        if *tactile == Some(t) {
                            return Ok(BindOutcome::default());
                        }
                        *tactile = Some(t);
                        Ok(BindOutcome {
                            changed: true,
                            ..Default::default()
                        })
                    }
                    _ => Err(OpcError::NotABodyPart(id.to_string())),
                }
            }
        }
    }

    /// Unique entity carrying `label` (case-insensitive).
    pub fn resolve(&self, label: &str) -> Result<EntityId, OpcError> {
        self.entities
            .values()
            .find(|e| e.label.as_deref().is_some_and(|l| same_label(l, label)))
            .map(|e| e.id.clone())
            .ok_or_else(|| OpcError::UnknownLabel(label.to_string()))
    }

    pub fn resolve_kind(&self, label: &str, kind: EntityKind) -> Result<EntityId, OpcError> {
        let id = self.resolve(label)?;
        if self.entities[&id].kind == kind {
            Ok(id)
        } else {
            Err(OpcError::UnknownLabel(label.to_string()))
        }
    }

    pub fn label_of(&self, id: &str) -> Option<&str> {
        self.entities.get(id).and_then(|e| e.label.as_deref())
    }

    pub fn snapshot(&self) -> Vec<Entity> {
        self.entities.values().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn object(id: &str) -> Entity {
        Entity {
            id: id.into(),
            kind: EntityKind::Object,
            label: None,
            present: true,
            saliency: 0.0,
            payload: Payload::Object {
                object: id.into(),
                region: Region::S,
                position: [0.5, 0.45],
                dimensions: [0.1, 0.1],
            },
        }
    }

    fn finger(joint: JointId) -> Entity {
        Entity {
            id: format!("joint_{joint}"),
            kind: EntityKind::BodyPart,
            label: None,
            present: true,
            saliency: 0.0,
            payload: Payload::BodyPart { joint, tactile: None },
        }
    }

    #[test]
    fn bind_label_makes_object_known() {
        let mut opc = Opc::new();
        opc.insert(object("obj_1"));
        opc.insert(object("obj_2"));
        assert_eq!(opc.modulator_counts().incomplete, 2);
        let out = opc.bind("obj_1", Binding::Label("cube".into())).unwrap();
        assert!(out.changed);
        assert_eq!(
            opc.modulator_counts(),
            ModulatorCounts {
                incomplete: 1,
                complete: 1
            }
        );
        assert_eq!(opc.resolve("cube").unwrap(), "obj_1");
        assert_eq!(opc.resolve("Cube").unwrap(), "obj_1");
    }

    #[test]
    fn identical_bind_is_idempotent() {
        let mut opc = Opc::new();
        opc.insert(object("obj_1"));
        opc.bind("obj_1", Binding::Label("cube".into())).unwrap();
        let before = opc.clone();
        let out = opc.bind("obj_1", Binding::Label("cube".into())).unwrap();
        assert!(!out.changed);
        assert_eq!(opc, before);
    }

    #[test]
    fn relabel_overwrites_and_reports() {
        let mut opc = Opc::new();
        opc.insert(object("obj_1"));
        opc.bind("obj_1", Binding::Label("cube".into())).unwrap();
        let out = opc.bind("obj_1", Binding::Label("box".into())).unwrap();
        assert_eq!(out.retagged_from.as_deref(), Some("cube"));
        assert_eq!(opc.label_of("obj_1"), Some("box"));
        assert!(opc.resolve("cube").is_err());
    }

    #[test]
    fn label_stays_injective() {
        let mut opc = Opc::new();
        opc.insert(object("obj_1"));
        opc.insert(object("obj_2"));
        opc.bind("obj_1", Binding::Label("cube".into())).unwrap();
        let out = opc.bind("obj_2", Binding::Label("cube".into())).unwrap();
        assert_eq!(out.displaced.as_deref(), Some("obj_1"));
        assert_eq!(opc.label_of("obj_1"), None);
        assert_eq!(opc.resolve("cube").unwrap(), "obj_2");
    }

    #[test]
    fn body_part_needs_name_and_touch() {
        let mut opc = Opc::new();
        opc.insert(finger(13));
        opc.bind("joint_13", Binding::Label("index".into())).unwrap();
        assert!(opc.get("joint_13").unwrap().missing_information());
        opc.bind("joint_13", Binding::Touch(103)).unwrap();
        assert!(!opc.get("joint_13").unwrap().missing_information());
        assert!(matches!(
            opc.bind("joint_13", Binding::Touch(103)),
            Ok(BindOutcome { changed: false, .. })
        ));
    }

    #[test]
    fn resolve_on_empty_store() {
        assert!(matches!(Opc::new().resolve("cube"), Err(OpcError::UnknownLabel(_))));
    }

    #[test]
    fn bind_errors() {
        let mut opc = Opc::new();
        opc.insert(object("obj_1"));
        assert!(matches!(
            opc.bind("nope", Binding::Label("x".into())),
            Err(OpcError::UnknownEntity(_))
        ));
        assert!(matches!(
            opc.bind("obj_1", Binding::Label("  ".into())),
            Err(OpcError::EmptyLabel)
        ));
        assert!(matches!(
            opc.bind("obj_1", Binding::Touch(1)),
            Err(OpcError::NotABodyPart(_))
        ));
    }
}
