//! Embodiment-randomized indoor object-goal navigation.
//!
//! The crate is organized bottom-up:
//!
//! - [`embodiment`]: collider/pivot/camera configurations, sampling, presets;
//! - [`scene`]: 2.5D heightfield houses and their file format;
//! - [`sensor`]: semantic + depth rendering by grid ray marching;
//! - [`sim`]: the navigation environment (kinematics, collisions, reward);
//! - [`planner`]: the safety-shaped A* expert;
//! - [`metrics`]: Success, SEL, SC, collision rate, safe episodes;
//! - [`dataset`]: sharded expert-trajectory datasets;
//! - [`harness`]: benchmark suites, policies and the external-policy bridge.

pub mod dataset;
pub mod embodiment;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod planner;
pub mod rng;
pub mod scene;
pub mod sensor;
pub mod sim;

pub use error::{Error, Result};

/// Serializes to JSON with object keys sorted.
pub fn canonical_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&serde_json::to_value(value)?)?)
}

/// Single-line variant of [`canonical_json`].
pub fn canonical_json_line<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}
