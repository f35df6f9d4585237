//! Core of a drive-regulated tabletop robot architecture: a deterministic
//! world simulator, the reactive, adaptive and contextual layers, and the
//! experiment harness that drives them.

pub mod adaptive;
pub mod config;
pub mod contextual;
pub mod engine;
pub mod harness;
pub mod log;
pub mod reactive;
pub mod world;
