//! Element forces, wall contact and collision integration.

mod collision;
mod contact;
mod network;

pub use collision::{
    mechanical_energy, run_collision, run_collision_with, simulate, write_trace_csv,
    CollisionScenario, EndReason, NetworkSystem, SeparationMonitor, SimSettings, SimTrace,
    StateView, TraceSummary,
};
pub use contact::{contact_forces, ContactModel};
pub use network::{
    accelerations, element_forces, ElementForces, Network, MIN_SEPARATION, STRAIGHT_TOLERANCE,
};
pub(crate) use network::flatten;
