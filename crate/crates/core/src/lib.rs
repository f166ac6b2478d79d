//! Collision simulation, structural design checks and ground re-orientation
//! planning for tensegrity-protected quadcopters.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod ode;
pub mod params;
pub mod reorient;
pub mod stress;
pub mod study;

pub use error::{Error, Result};
