//! Point-mass network models of the tensegrity shell and the propeller guard.
//!
//! Both vehicles are described by the same [`StructureModel`]: lumped node
//! masses joined by axial members (rods and strings) and torsional joints
//! between consecutive short rods.

mod guard;
mod hull;
mod icosahedron;
mod inertia;
mod io;

pub use guard::{build_propeller_guard, GuardConfig};
pub use hull::{convex_hull_facets, min_enclosing_rod_length, point_hull_margin, HullFacet};
pub use icosahedron::{build_icosahedron, init_pretension, IcosahedronConfig, RodSection};
pub use inertia::{compute_inertia, face_stability, FaceStability};
pub use io::{load_model, save_model, ModelDocument, MODEL_SCHEMA_VERSION};

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Isotropic material constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    /// kg/m^3
    pub density: f64,
    /// Pa
    pub youngs_modulus: f64,
    /// Pa
    pub yield_strength: f64,
}

impl MaterialSpec {
    pub fn validate(&self, what: &str) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.density) && ok(self.youngs_modulus) && ok(self.yield_strength) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "{what} material constants must be strictly positive: {self:?}"
            )))
        }
    }
}

/// Structure mass split between rods and strings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassBudget {
    /// Total shell (rods + strings) mass m_s, kg.
    pub structure_mass: f64,
    /// Total quadcopter mass m_q, kg.
    pub quad_mass: f64,
    /// Rod-to-string mass ratio γ_m.
    pub rod_string_ratio: f64,
}

impl MassBudget {
    pub fn rod_mass(&self) -> f64 {
        self.structure_mass * self.rod_string_ratio / (1.0 + self.rod_string_ratio)
    }

    pub fn string_mass(&self) -> f64 {
        self.structure_mass / (1.0 + self.rod_string_ratio)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Tensegrity,
    Quadcopter,
    Hub,
    Ring,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Body-frame position, m.
    pub position: Vector3<f64>,
    /// kg
    pub mass: f64,
    pub role: NodeRole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Rod,
    String,
    Joint,
}

/// Massless linear spring-damper along the line between two nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    /// `ElementKind::Rod` or `ElementKind::String`.
    pub kind: ElementKind,
    pub nodes: [usize; 2],
    /// Undeformed length, m.
    pub rest_length: f64,
    /// Cross-section area, m^2.
    pub area: f64,
    /// Second moment of area, m^4 (zero for strings).
    pub second_moment: f64,
    /// Outer radius of the section, m.
    pub outer_radius: f64,
    pub youngs_modulus: f64,
    /// E·A / rest_length, N/m.
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
}

impl Member {
    pub fn is_rod(&self) -> bool {
        self.kind == ElementKind::Rod
    }

    pub fn is_string(&self) -> bool {
        self.kind == ElementKind::String
    }

    fn set_rest_length(&mut self, rest_length: f64) {
        self.rest_length = rest_length;
        self.stiffness = self.youngs_modulus * self.area / rest_length;
    }
}

/// Torsional spring-damper at `nodes[1]` between the short rods
/// `nodes[0]–nodes[1]` and `nodes[1]–nodes[2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub nodes: [usize; 3],
    /// Angle between the two rods at zero moment, rad.
    pub rest_angle: f64,
    /// ξ = E·I / L_{i,k}, N·m/rad.
    pub stiffness: f64,
    /// N·m·s/rad
    pub damping: f64,
    pub second_moment: f64,
    pub outer_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceKind {
    AllString,
    Rod,
}

/// Triangular face of the tensegrity with its outward unit normal
/// (evaluated at the reference geometry).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub nodes: [usize; 3],
    pub normal: Vector3<f64>,
    pub kind: FaceKind,
}

impl Face {
    pub fn shares_edge(&self, other: &Face) -> Option<[usize; 2]> {
        let shared: Vec<usize> = self
            .nodes
            .iter()
            .copied()
            .filter(|n| other.nodes.contains(n))
            .collect();
        (shared.len() == 2).then(|| [shared[0], shared[1]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellKind {
    Icosahedron,
    PropellerGuard,
}

/// Lumped-mass stress network of a protected quadcopter.
///
/// Immutable once built; builders return new values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureModel {
    pub kind: ShellKind,
    pub nodes: Vec<Node>,
    pub members: Vec<Member>,
    pub joints: Vec<Joint>,
    /// Shell faces (icosahedron only).
    pub faces: Vec<Face>,
    /// Convex-hull facets over the shell nodes, outward ordered
    /// (icosahedron only). Used for the exposure check.
    pub hull_faces: Vec<[usize; 3]>,
    /// End nodes of every full-length rod (icosahedron only).
    pub rods: Vec<[usize; 2]>,
    /// Motor/propeller nodes.
    pub quad_nodes: [usize; 4],
    /// Propeller handedness (+1 right-handed, -1 left-handed).
    pub prop_handedness: [f64; 4],
    /// Columns are the body axes e_x, e_y, e_z in node coordinates.
    pub frame_axes: Matrix3<f64>,
    /// String pre-tension the rest lengths were set for, N.
    pub pretension: f64,
    pub rod_material: MaterialSpec,
    pub string_material: Option<MaterialSpec>,
}

impl StructureModel {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.mass).sum()
    }

    pub fn center_of_mass(&self) -> Vector3<f64> {
        let m = self.total_mass();
        self.nodes
            .iter()
            .fold(Vector3::zeros(), |acc, n| acc + n.position * n.mass)
            / m
    }

    pub fn shell_nodes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.role == NodeRole::Tensegrity)
            .map(|(i, _)| i)
            .collect()
    }

    /// Rod and string indicator tables N^r, N^s (symmetric, 0/1).
    pub fn connectivity(&self) -> (DMatrix<u8>, DMatrix<u8>) {
        let n = self.nodes.len();
        let mut rods = DMatrix::zeros(n, n);
        let mut strings = DMatrix::zeros(n, n);
        for m in &self.members {
            let [i, j] = m.nodes;
            let table = if m.is_rod() { &mut rods } else { &mut strings };
            table[(i, j)] = 1;
            table[(j, i)] = 1;
        }
        (rods, strings)
    }

    pub fn rod_members(&self) -> impl Iterator<Item = (usize, &Member)> {
        self.members.iter().enumerate().filter(|(_, m)| m.is_rod())
    }

    pub fn string_members(&self) -> impl Iterator<Item = (usize, &Member)> {
        self.members.iter().enumerate().filter(|(_, m)| m.is_string())
    }

    /// Indices of the faces adjacent to `face` (sharing two nodes).
    pub fn face_neighbors(&self, face: usize) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&g| g != face && self.faces[face].shares_edge(&self.faces[g]).is_some())
            .collect()
    }

    /// Recomputes critical damping constants from the current node masses,
    /// stiffnesses and rest geometry.
    ///
    /// Linear: c = 2√(K μ) with the reduced mass μ of the two end nodes.
    /// Torsional: c = 2√(ξ I) with I the reduced value of m_i L_ij² and
    /// m_k L_jk².
    pub fn update_damping(&mut self) {
        for m in &mut self.members {
            let [i, j] = m.nodes;
            let (mi, mj) = (self.nodes[i].mass, self.nodes[j].mass);
            let mu = mi * mj / (mi + mj);
            m.damping = 2.0 * (m.stiffness * mu).sqrt();
        }
        for joint in &mut self.joints {
            let [i, j, k] = joint.nodes;
            let lij = (self.nodes[i].position - self.nodes[j].position).norm();
            let ljk = (self.nodes[k].position - self.nodes[j].position).norm();
            let ii = self.nodes[i].mass * lij * lij;
            let ik = self.nodes[k].mass * ljk * ljk;
            let reduced = ii * ik / (ii + ik);
            joint.damping = 2.0 * (joint.stiffness * reduced).sqrt();
        }
    }

    /// Returns a copy with every damping constant set to zero.
    pub fn without_damping(&self) -> StructureModel {
        let mut out = self.clone();
        out.members.iter_mut().for_each(|m| m.damping = 0.0);
        out.joints.iter_mut().for_each(|j| j.damping = 0.0);
        out
    }

    /// Translates the model so the center of mass sits at the origin.
    pub fn centered(&self) -> StructureModel {
        let com = self.center_of_mass();
        let mut out = self.clone();
        out.nodes.iter_mut().for_each(|n| n.position -= com);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidModel("model has no nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if !(node.mass > 0.0) || !node.position.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "node {i} must have positive mass and finite position"
                )));
            }
        }
        let in_range = |idx: &[usize]| idx.iter().all(|&i| i < n);
        if !self.members.iter().all(|m| in_range(&m.nodes))
            || !self.joints.iter().all(|j| in_range(&j.nodes))
            || !in_range(&self.quad_nodes)
        {
            return Err(Error::InvalidModel("element references a missing node".into()));
        }
        Ok(())
    }
}

/// Angle between `a - hinge` and `c - hinge`, robust near 0 and π.
pub(crate) fn included_angle(a: &Vector3<f64>, hinge: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let u = a - hinge;
    let v = c - hinge;
    u.cross(&v).norm().atan2(u.dot(&v))
}

/// Solid or annular circular rod section.
pub(crate) fn rod_section(area: f64, section: RodSection) -> Result<(f64, f64)> {
    match section {
        RodSection::Solid => {
            let r = (area / std::f64::consts::PI).sqrt();
            Ok((r, std::f64::consts::PI * r.powi(4) / 4.0))
        }
        RodSection::Tube { outer_radius } => {
            let full = std::f64::consts::PI * outer_radius * outer_radius;
            if !(outer_radius > 0.0) || area > full {
                return Err(Error::InfeasibleGeometry(format!(
                    "rod area {area:.3e} m^2 does not fit a tube of outer radius {outer_radius:.3e} m"
                )));
            }
            let inner_sq = outer_radius * outer_radius - area / std::f64::consts::PI;
            let i = std::f64::consts::PI * (outer_radius.powi(4) - inner_sq * inner_sq) / 4.0;
            Ok((outer_radius, i))
        }
    }
}
