//! Drives, the allostatic scheduler and the behavior library.

pub mod behaviors;
pub mod drives;

pub use behaviors::{
    build_acquisition_behavior, build_expression_behavior, choose_acquisition_target, choose_expression_target,
    BehaviorError, BehaviorKind, BehaviorRequest, Expectation, ScriptStep,
};
pub use drives::{Drive, DriveKind, DriveSpec, DriveState, Drives, ModulatorCounts};
