//! Ground re-orientation: face-to-face rotations, feasibility under thrust,
//! contact and friction limits, graph planning, tracking control and
//! torque-to-thrust conversion.

mod allocation;
mod control;
mod feasibility;
mod graph;
pub mod lp;
mod pivot;

pub use allocation::{
    converter_error_map, pinv_clamped, torque_to_thrust, write_error_map_csv, zero_sum_clamped, AllocationBranch, ErrorMapCell,
    ThrustAllocation,
};
pub use control::{reference_trajectory, tracking_step, ControllerGains, TrackingOutput, TrajectoryRef};
pub use feasibility::{
    check_rotation_feasibility, rotation_capacity, verify_witness, FeasibilityOptions, FeasibilityResult, Witness,
};
pub use graph::{
    build_face_graph, default_goal_faces, payload_margin, plan_paths, reaches_goals, FaceEdge, FaceGraph,
    PayloadMargin, ReorientPlan, RotationCapacity,
};
pub use pivot::{resting_attitude, simulate_pivot, write_pivot_csv, PivotConfig, PivotSample, PivotTrace};

use nalgebra::{Matrix3, Matrix3x4, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{compute_inertia, ShellKind, StructureModel};

/// Rigid-body and actuator description in the body frame (origin at the
/// centre of mass, thrust along +z).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// kg
    pub total_mass: f64,
    /// About the centre of mass, kg·m².
    pub inertia: Matrix3<f64>,
    /// m
    pub prop_positions: [Vector3<f64>; 4],
    pub prop_handedness: [f64; 4],
    /// Yaw drag torque per unit thrust κ, m.
    pub torque_coeff: f64,
    /// N
    pub thrust_min: f64,
    /// N
    pub thrust_max: f64,
    /// m/s²
    pub gravity: f64,
    /// Shell node frame to body frame.
    pub mount_rotation: Rotation3<f64>,
}

impl VehicleParams {
    /// Mass, inertia and propeller layout taken from a tensegrity model.
    pub fn from_model(
        model: &StructureModel,
        thrust_max: f64,
        thrust_min: f64,
        torque_coeff: f64,
        mount_rotation: Rotation3<f64>,
    ) -> Result<Self> {
        if model.kind != ShellKind::Icosahedron {
            return Err(Error::InvalidInput("re-orientation needs a tensegrity shell".into()));
        }
        let com = model.center_of_mass();
        let r = mount_rotation.matrix();
        let v = Self {
            total_mass: model.total_mass(),
            inertia: r * compute_inertia(model, &com) * r.transpose(),
            prop_positions: model.quad_nodes.map(|i| mount_rotation * (model.nodes[i].position - com)),
            prop_handedness: model.prop_handedness,
            torque_coeff,
            thrust_min,
            thrust_max,
            gravity: 9.81,
            mount_rotation,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_mass > 0.0 && self.gravity > 0.0) {
            return Err(Error::InvalidConfig("mass and gravity must be positive".into()));
        }
        if !(self.thrust_min <= self.thrust_max) {
            return Err(Error::InvalidConfig("thrust_min must not exceed thrust_max".into()));
        }
        if self.prop_handedness.iter().sum::<f64>().abs() > 1e-12
            || self.prop_handedness.iter().any(|h| h.abs() != 1.0)
        {
            return Err(Error::InvalidConfig("handedness must be two +1 and two -1".into()));
        }
        let j = &self.inertia;
        if (j - j.transpose()).norm() > 1e-12 * j.norm() || j.cholesky().is_none() {
            return Err(Error::InvalidConfig("inertia must be symmetric positive definite".into()));
        }
        Ok(())
    }

    /// Same vehicle with `extra` kg added at the centre of mass.
    pub fn with_added_mass(&self, extra: f64) -> Self {
        Self { total_mass: self.total_mass + extra, ..self.clone() }
    }

    /// Torque about `point` per unit thrust of every propeller (columns).
    pub fn torque_map(&self, point: &Vector3<f64>) -> Matrix3x4<f64> {
        let ez = Vector3::z();
        Matrix3x4::from_columns(&std::array::from_fn::<_, 4, _>(|i| {
            (self.prop_positions[i] - point).cross(&ez) + ez * (self.prop_handedness[i] * self.torque_coeff)
        }))
    }

    /// Inertia about `point` by the parallel-axis theorem.
    pub fn inertia_about(&self, point: &Vector3<f64>) -> Matrix3<f64> {
        let q = -point;
        self.inertia + (Matrix3::identity() * q.norm_squared() - q * q.transpose()) * self.total_mass
    }
}

/// Rotation of the resting vehicle from face `from_face` onto neighbour
/// `to_face` about their shared edge. Vectors are in the body frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub from_face: usize,
    pub to_face: usize,
    /// n_r, m
    pub rotation_point: Vector3<f64>,
    /// s_r: the body turns by +Θ_r about this axis.
    pub axis: Vector3<f64>,
    /// Θ_r, rad
    pub angle: f64,
    pub contact_nodes: [usize; 2],
    /// Body-frame positions of the contact nodes, m.
    pub contact_points: [Vector3<f64>; 2],
    /// v_a: unit ground normal (pointing away from the ground) at the start.
    pub ground_normal: Vector3<f64>,
}

/// Body-frame position of a model node.
pub fn body_position(model: &StructureModel, mount: &Rotation3<f64>, node: usize) -> Vector3<f64> {
    mount * (model.nodes[node].position - model.center_of_mass())
}

/// Hinge, axis and angle of the rotation from face `fa` to neighbour `fb`.
///
/// The axis is signed so that the body rotation by +Θ_r about it carries
/// the outward normal of `fb` onto that of `fa` (`fb` ends up facing the
/// ground where `fa` was).
pub fn rotation_spec(model: &StructureModel, mount: &Rotation3<f64>, fa: usize, fb: usize) -> Result<RotationSpec> {
    let (a, b) = match (model.faces.get(fa), model.faces.get(fb)) {
        (Some(a), Some(b)) if fa != fb => (a, b),
        _ => return Err(Error::InvalidPair(fa, fb)),
    };
    let edge = a.shares_edge(b).ok_or(Error::InvalidPair(fa, fb))?;
    let na = mount * a.normal;
    let nb = mount * b.normal;
    let p = edge.map(|i| body_position(model, mount, i));
    let dir = (p[1] - p[0]).normalize();
    let c = nb.cross(&na);
    let angle = c.norm().atan2(nb.dot(&na));
    let axis = if c.dot(&dir) >= 0.0 { dir } else { -dir };
    Ok(RotationSpec {
        from_face: fa,
        to_face: fb,
        rotation_point: (p[0] + p[1]) / 2.0,
        axis,
        angle,
        contact_nodes: edge,
        contact_points: p,
        ground_normal: -na,
    })
}

impl RotationSpec {
    pub fn rotation(&self, angle: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Unit::new_unchecked(self.axis), angle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FaceKind;
    use crate::params;
    use approx::assert_relative_eq;

    #[test]
    fn normals_map_and_angles() {
        let (model, _) = params::experimental_vehicle().unwrap();
        let id = Rotation3::identity();
        for fa in 0..model.faces.len() {
            for fb in model.face_neighbors(fa) {
                let s = rotation_spec(&model, &id, fa, fb).unwrap();
                let na = model.faces[fa].normal;
                let nb = model.faces[fb].normal;
                assert_relative_eq!(s.rotation(s.angle) * nb, na, epsilon = 1e-9);
                assert!(s.angle > 0.0 && s.angle < std::f64::consts::PI);
                if model.faces[fa].kind == FaceKind::Rod && model.faces[fb].kind == FaceKind::Rod {
                    assert_relative_eq!(s.angle.to_degrees(), 90.0, epsilon = 1e-9);
                }
            }
        }
        assert!(rotation_spec(&model, &id, 0, 0).is_err());
    }

    #[test]
    fn torque_map_shift_identity() {
        let (_, v) = params::experimental_vehicle().unwrap();
        let p = Vector3::new(0.03, -0.02, 0.05);
        let shift = v.torque_map(&p) - v.torque_map(&Vector3::zeros());
        for i in 0..4 {
            assert_relative_eq!(shift.column(i).into_owned(), -p.cross(&Vector3::z()), epsilon = 1e-15);
        }
    }
}
