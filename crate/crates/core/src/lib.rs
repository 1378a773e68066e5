//! Simulation and benchmarking toolkit for 2D dynamic-obstacle avoidance:
//! random dynamic maps, noise-free avoidance trials, environment difficulty
//! metrics and their statistical validation against planner success rates.

pub mod analysis;
pub mod collision;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod perception;
pub mod planning;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Bounds, Vec2};
