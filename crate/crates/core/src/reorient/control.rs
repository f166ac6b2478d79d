use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::{RotationSpec, VehicleParams};
use crate::error::{Error, Result};

/// Bang-bang rotation about a fixed body axis: constant angular
/// acceleration for the first half, mirrored deceleration for the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRef {
    /// T, s
    pub duration: f64,
    /// Θ_r, rad
    pub angle: f64,
    /// Unit rotation axis.
    pub axis: Vector3<f64>,
    /// R_s, body to world at the start.
    pub start: Rotation3<f64>,
}

impl TrajectoryRef {
    /// 4Θ_r/T², rad/s²
    pub fn acceleration_magnitude(&self) -> f64 {
        4.0 * self.angle / (self.duration * self.duration)
    }

    /// Scalar angle, rate and acceleration along the axis.
    pub fn scalar(&self, t: f64) -> (f64, f64, f64) {
        let (tt, a) = (self.duration, self.acceleration_magnitude());
        if t <= 0.0 {
            (0.0, 0.0, 0.0)
        } else if t <= tt / 2.0 {
            (0.5 * a * t * t, a * t, a)
        } else if t < tt {
            let r = tt - t;
            (self.angle - 0.5 * a * r * r, a * r, -a)
        } else {
            (self.angle, 0.0, 0.0)
        }
    }

    /// Θ_ref, Θ̇_ref, Θ̈_ref as vectors along the axis.
    pub fn at(&self, t: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let (p, v, a) = self.scalar(t);
        (self.axis * p, self.axis * v, self.axis * a)
    }

    /// R_ref = R_s · exp(Θ_ref).
    pub fn attitude(&self, t: f64) -> Rotation3<f64> {
        self.start * Rotation3::new(self.at(t).0)
    }
}

pub fn reference_trajectory(spec: &RotationSpec, duration: f64, start: Rotation3<f64>) -> Result<TrajectoryRef> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidInput("trajectory duration must be positive".into()));
    }
    Ok(TrajectoryRef { duration, angle: spec.angle, axis: spec.axis, start })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// ζ_r
    pub damping_ratio: f64,
    /// ω_r, rad/s
    pub natural_frequency: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { damping_ratio: 1.0, natural_frequency: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingOutput {
    /// τ_d about the rotation point, N·m
    pub torque: Vector3<f64>,
    /// Θ̈_d, rad/s²
    pub acceleration: Vector3<f64>,
    /// δ_r, rad
    pub attitude_error: Vector3<f64>,
    /// τ_g, N·m
    pub gravity_torque: Vector3<f64>,
}

/// Desired torque about the rotation point for attitude `r` (body to world)
/// and measured body rate `omega`.
pub fn tracking_step(
    r: &Matrix3<f64>,
    omega: &Vector3<f64>,
    traj: &TrajectoryRef,
    t: f64,
    gains: &ControllerGains,
    vehicle: &VehicleParams,
    spec: &RotationSpec,
) -> Result<TrackingOutput> {
    let ortho = (r.transpose() * r - Matrix3::identity()).norm();
    if !(ortho <= 1e-6) || r.determinant() < 0.0 {
        return Err(Error::InvalidAttitude(ortho));
    }
    let rot = Rotation3::from_matrix_unchecked(*r);
    let (_, rate_ref, acc_ref) = traj.at(t);
    let delta = (rot.inverse() * traj.attitude(t)).scaled_axis();
    let (z, w) = (gains.damping_ratio, gains.natural_frequency);
    let acc = acc_ref + (rate_ref - omega) * (2.0 * z * w) + delta * (w * w);
    let j = vehicle.inertia_about(&spec.rotation_point);
    // Weight expressed in the body frame.
    let weight = rot.inverse() * Vector3::new(0.0, 0.0, -vehicle.gravity * vehicle.total_mass);
    let tau_g = (-spec.rotation_point).cross(&weight);
    let torque = j * acc + omega.cross(&(j * omega)) - tau_g;
    Ok(TrackingOutput { torque, acceleration: acc, attitude_error: delta, gravity_torque: tau_g })
}
