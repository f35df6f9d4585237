//! Perception abstraction, language handling and the entity store.

pub mod grammar;
pub mod opc;
pub mod recognition;
pub mod saliency;

pub use grammar::{Bindings, Grammar, GrammarError, Paor, Parsed};
pub use opc::{BindOutcome, Binding, Entity, EntityId, EntityKind, Opc, OpcError, Payload};
pub use recognition::{ActionClassifier, Classification, ConfusionMatrix, FaceOracle};
pub use saliency::SaliencyParams;
