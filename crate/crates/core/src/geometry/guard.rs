use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    included_angle, rod_section, ElementKind, Joint, MassBudget, MaterialSpec, Member, Node,
    NodeRole, RodSection, ShellKind, StructureModel,
};
use crate::error::{Error, Result};

/// Planar propeller guard: hub, four arms through the motors, and one
/// polygonal outer ring joined to the arm tips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardConfig {
    /// Propeller diameter d, m.
    pub prop_diameter: f64,
    /// Hub-to-motor distance, m. Defaults to d/√2 (adjacent disks touch).
    #[serde(default)]
    pub arm_radius: Option<f64>,
    /// Radial gap between the propeller tips and the ring, m.
    #[serde(default)]
    pub clearance: f64,
    /// Total number of ring elements; a multiple of 4, at least 8.
    #[serde(default = "default_ring_segments")]
    pub ring_segments: usize,
    pub rod_material: MaterialSpec,
    /// Only `structure_mass` and `quad_mass` are used.
    pub mass: MassBudget,
    #[serde(default)]
    pub rod_section: RodSection,
}

fn default_ring_segments() -> usize {
    16
}

impl GuardConfig {
    pub fn arm_radius(&self) -> f64 {
        self.arm_radius
            .unwrap_or(self.prop_diameter / std::f64::consts::SQRT_2)
    }

    /// Distance from the hub to the ring along each arm.
    pub fn ring_apothem(&self) -> f64 {
        self.arm_radius() + self.prop_diameter / 2.0 + self.clearance
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prop_diameter > 0.0 && self.prop_diameter.is_finite()) {
            return Err(Error::InvalidConfig("prop_diameter must be positive".into()));
        }
        if !(self.arm_radius() > self.prop_diameter / 2.0) {
            return Err(Error::InvalidConfig("arm_radius must exceed d/2".into()));
        }
        if !(self.clearance >= 0.0) {
            return Err(Error::InvalidConfig("clearance must be non-negative".into()));
        }
        if self.ring_segments < 8 || self.ring_segments % 4 != 0 {
            return Err(Error::InvalidConfig(
                "ring_segments must be a multiple of 4 and at least 8".into(),
            ));
        }
        if !(self.mass.structure_mass > 0.0) || !(self.mass.quad_mass > 0.0) {
            return Err(Error::InvalidConfig("structure and quadcopter masses must be positive".into()));
        }
        self.rod_material.validate("rod")
    }
}

pub fn build_propeller_guard(cfg: &GuardConfig) -> Result<StructureModel> {
    cfg.validate()?;
    let arm = cfg.arm_radius();

    let apothem = cfg.ring_apothem();
    let polygon = cfg.ring_segments - 4;
    let circumradius = apothem / (PI / polygon as f64).cos();
    let dir = |phi: f64| Vector3::new(phi.cos(), phi.sin(), 0.0);

    // 0 hub, 1..=4 motors, 5..=8 junctions, then polygon vertices.
    let mut positions = vec![Vector3::zeros()];
    let mut roles = vec![NodeRole::Hub];
    for k in 0..4 {
        positions.push(dir(k as f64 * FRAC_PI_2) * arm);
        roles.push(NodeRole::Quadcopter);
    }
    for k in 0..4 {
        positions.push(dir(k as f64 * FRAC_PI_2) * apothem);
        roles.push(NodeRole::Ring);
    }
    let first_vertex = positions.len();
    for k in 0..polygon {
        let phi = PI / polygon as f64 + 2.0 * PI * k as f64 / polygon as f64;
        positions.push(dir(phi) * circumradius);
        roles.push(NodeRole::Ring);
    }

    // Ring loop in angular order, junctions inserted mid-edge.
    let per_quadrant = polygon / 4;
    let mut ring = Vec::with_capacity(cfg.ring_segments);
    for q in 0..4 {
        ring.push(5 + q);
        for k in 0..per_quadrant {
            ring.push(first_vertex + q * per_quadrant + k);
        }
    }

    let mut pairs: Vec<[usize; 2]> = Vec::new();
    for k in 0..4 {
        pairs.push([0, 1 + k]);
        pairs.push([1 + k, 5 + k]);
    }
    for w in 0..ring.len() {
        pairs.push([ring[w], ring[(w + 1) % ring.len()]]);
    }

    let total_length: f64 = pairs
        .iter()
        .map(|&[i, j]| (positions[i] - positions[j]).norm())
        .sum();
    let area = cfg.mass.structure_mass / (cfg.rod_material.density * total_length);
    let (radius, second_moment) = rod_section(area, cfg.rod_section)?;

    let mut masses = vec![0.0; positions.len()];
    for k in 0..4 {
        masses[1 + k] += cfg.mass.quad_mass / 4.0;
    }
    let e = cfg.rod_material.youngs_modulus;
    let members: Vec<Member> = pairs
        .iter()
        .map(|&[i, j]| {
            let length = (positions[i] - positions[j]).norm();
            let m = cfg.rod_material.density * area * length;
            masses[i] += m / 2.0;
            masses[j] += m / 2.0;
            Member {
                kind: ElementKind::Rod,
                nodes: [i, j],
                rest_length: length,
                area,
                second_moment,
                outer_radius: radius,
                youngs_modulus: e,
                stiffness: e * area / length,
                damping: 0.0,
            }
        })
        .collect();

    let mut triples: Vec<[usize; 3]> = vec![
        [1, 0, 2],
        [2, 0, 3],
        [3, 0, 4],
        [4, 0, 1],
        [1, 0, 3],
        [2, 0, 4],
    ];
    for k in 0..4 {
        triples.push([0, 1 + k, 5 + k]);
    }
    for w in 0..ring.len() {
        let prev = ring[(w + ring.len() - 1) % ring.len()];
        let next = ring[(w + 1) % ring.len()];
        let node = ring[w];
        if (5..9).contains(&node) {
            let motor = node - 4;
            triples.push([motor, node, prev]);
            triples.push([motor, node, next]);
        }
        triples.push([prev, node, next]);
    }
    let joints = triples
        .into_iter()
        .map(|[i, j, k]| {
            let lij = (positions[i] - positions[j]).norm();
            let ljk = (positions[k] - positions[j]).norm();
            Joint {
                nodes: [i, j, k],
                rest_angle: included_angle(&positions[i], &positions[j], &positions[k]),
                stiffness: e * second_moment / (lij + ljk),
                damping: 0.0,
                second_moment,
                outer_radius: radius,
            }
        })
        .collect();

    let nodes = positions
        .into_iter()
        .zip(masses)
        .zip(roles)
        .map(|((position, mass), role)| Node { position, mass, role })
        .collect();

    let mut model = StructureModel {
        kind: ShellKind::PropellerGuard,
        nodes,
        members,
        joints,
        faces: Vec::new(),
        hull_faces: Vec::new(),
        rods: Vec::new(),
        quad_nodes: [1, 2, 3, 4],
        prop_handedness: [1.0, -1.0, 1.0, -1.0],
        frame_axes: Matrix3::identity(),
        pretension: 0.0,
        rod_material: cfg.rod_material,
        string_material: None,
    };
    model.update_damping();
    Ok(model)
}
