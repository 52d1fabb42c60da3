//! Planning-and-grasping in tabletop clutter: a quasi-static world, a
//! geometry-driven grasp controller, an atomic skill library exposed over a
//! JSON tool protocol, planners and a benchmark harness.

pub mod config;
pub mod error;
pub mod executor;
pub mod geograsp;
pub mod geometry;
pub mod handrig;
pub mod planner;
pub mod render;
pub mod scenegen;
pub mod simworld;
pub mod skills;
pub mod toolserver;

pub use error::{Error, Result};
