//! Experiment harness: scripted partners, scenario runs, metrics,
//! interaction diagrams, the golden scenario and seeded sweeps.

pub mod diagram;
pub mod golden;
pub mod metrics;
pub mod policy;
pub mod runner;
pub mod sweep;

pub use diagram::{bars, diagram, ethogram_svg, Bar, Diagram, Row};
pub use metrics::{metrics, Metrics};
pub use policy::{Composite, Cooperative, Policy, PolicyView, Scripted, Silent, TaskDriven};
pub use runner::{drive, run, run_with, write_artifacts, RunOptions, RunOutput, RunStatus};
