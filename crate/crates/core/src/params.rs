//! Reference parameter set for the tensegrity / propeller-guard comparison.
//!
//! Yield strengths are not part of the reference set; the values below are
//! representative of composite rods and polymer strings.

use nalgebra::Rotation3;

use crate::error::Result;
use crate::geometry::{
    build_icosahedron, min_enclosing_rod_length, GuardConfig, IcosahedronConfig, MassBudget, MaterialSpec, RodSection,
    StructureModel,
};
use crate::reorient::VehicleParams;

pub const PRETENSION: f64 = 20.0;
pub const PROP_DIAMETER: f64 = 0.063;
pub const WALL_STIFFNESS: f64 = 4.7e7;
pub const SPEED: f64 = 5.0;
pub const QUAD_OFFSET: f64 = 0.25;
/// Upper bound on simulated contact time, s; runs stop earlier on separation.
pub const COLLISION_DURATION: f64 = 0.15;

pub fn rod_material() -> MaterialSpec {
    MaterialSpec { density: 2000.0, youngs_modulus: 3.2e10, yield_strength: 5.0e8 }
}

pub fn string_material() -> MaterialSpec {
    MaterialSpec { density: 1150.0, youngs_modulus: 4.1e9, yield_strength: 8.0e7 }
}

pub fn mass_budget() -> MassBudget {
    MassBudget { structure_mass: 0.05, quad_mass: 0.25, rod_string_ratio: 20.0 }
}

/// Smallest shell enclosing the propellers, with the reference materials.
pub fn icosahedron_config() -> IcosahedronConfig {
    IcosahedronConfig {
        rod_length: min_enclosing_rod_length(PROP_DIAMETER, QUAD_OFFSET, 0.0),
        rod_material: rod_material(),
        string_material: string_material(),
        mass: mass_budget(),
        pretension: PRETENSION,
        quad_offset: QUAD_OFFSET,
        rod_section: RodSection::Solid,
    }
}

/// Smallest guard hosting the propellers, with the reference materials.
pub fn guard_config() -> GuardConfig {
    GuardConfig {
        prop_diameter: PROP_DIAMETER,
        arm_radius: None,
        clearance: 0.0,
        ring_segments: 16,
        rod_material: rod_material(),
        mass: mass_budget(),
        rod_section: RodSection::Solid,
    }
}

pub const EXPERIMENT_THRUST_MAX: f64 = 2.8;
pub const EXPERIMENT_THRUST_MIN: f64 = -1.4;
pub const EXPERIMENT_TORQUE_COEFF: f64 = 0.01;

/// Flight-test shell: 0.2 m rods, 95 g shell on a 205 g quadcopter.
pub fn experimental_config() -> IcosahedronConfig {
    IcosahedronConfig {
        rod_length: 0.2,
        mass: MassBudget { structure_mass: 0.095, quad_mass: 0.205, rod_string_ratio: 20.0 },
        ..icosahedron_config()
    }
}

/// Flight-test vehicle with thrusts in [-1.4, 2.8] N per propeller and
/// κ = 0.01 m.
pub fn experimental_vehicle() -> Result<(StructureModel, VehicleParams)> {
    let model = build_icosahedron(&experimental_config())?;
    let vehicle = VehicleParams::from_model(
        &model,
        EXPERIMENT_THRUST_MAX,
        EXPERIMENT_THRUST_MIN,
        EXPERIMENT_TORQUE_COEFF,
        Rotation3::identity(),
    )?;
    Ok((model, vehicle))
}
