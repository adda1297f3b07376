//! Desk-scale multimodal manipulation tasks.
//!
//! * `fork`: reach a goal around either side of an obstacle.
//! * `phased`: reach, grasp, carry and insert, with two routes in both the
//!   reach and the carry.
//! * `wipe`: turn to find an eraser, pick it up, walk to a board and wipe it,
//!   with base velocity commands and a stand flag.
//!
//! Scripted demonstrators generate datasets; [`rollout`] evaluates policies.

pub mod dataset;
pub mod env;
pub mod error;
pub mod fork;
pub mod geometry;
pub mod phased;
pub mod rollout;
pub mod wipe;

pub use env::{EnvState, Environment, Expert, TaskKind, TaskSpec};
pub use error::{EnvError, Result};
