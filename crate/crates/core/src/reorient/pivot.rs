use std::io::Write;

use nalgebra::{Rotation3, SMatrix, SVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::allocation::{torque_to_thrust, AllocationBranch};
use super::control::{tracking_step, ControllerGains, TrajectoryRef};
use super::{RotationSpec, VehicleParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PivotConfig {
    /// Controller rate, Hz.
    pub control_rate: f64,
    /// RK4 steps per control period.
    pub substeps: usize,
    /// Friction coefficient used for the slip check.
    pub friction: f64,
    /// Standard deviation of additive gyro noise, rad/s.
    pub gyro_noise: f64,
    /// Standard deviation of attitude noise per axis, rad.
    pub attitude_noise: f64,
    pub seed: u64,
    /// Initial angle offset about the hinge, rad.
    pub initial_angle: f64,
}

impl Default for PivotConfig {
    fn default() -> Self {
        Self {
            control_rate: 500.0,
            substeps: 4,
            friction: 0.2,
            gyro_noise: 0.0,
            attitude_noise: 0.0,
            seed: 0,
            initial_angle: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotSample {
    /// s
    pub t: f64,
    /// rad
    pub angle: f64,
    /// rad/s
    pub rate: f64,
    /// rad
    pub reference: f64,
    /// N
    pub thrusts: [f64; 4],
    /// Body-frame hinge reactions, N.
    pub reactions: [Vector3<f64>; 2],
    /// N
    pub normal_forces: [f64; 2],
    pub lift_off: bool,
    pub slip: bool,
    pub branch: AllocationBranch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotTrace {
    pub samples: Vec<PivotSample>,
    /// rad
    pub final_angle: f64,
    /// rad/s
    pub final_rate: f64,
    pub target_angle: f64,
    pub reached: bool,
    pub slip_violations: usize,
    pub lift_off_violations: usize,
    /// Largest |θ_ref − θ|, rad.
    pub max_tracking_error: f64,
}

/// Attitude at rest on the start face: ground normal mapped to world +z.
pub fn resting_attitude(spec: &RotationSpec) -> Rotation3<f64> {
    let up = spec.ground_normal.normalize();
    Rotation3::rotation_between(&up, &Vector3::z()).unwrap_or_else(|| {
        let perp = up.cross(&Vector3::ith(up.iamin(), 1.0)).normalize();
        Rotation3::new(perp * std::f64::consts::PI)
    })
}

struct Hinge<'a> {
    spec: &'a RotationSpec,
    vehicle: &'a VehicleParams,
    start: Rotation3<f64>,
    j_axis: f64,
}

impl Hinge<'_> {
    fn attitude(&self, angle: f64) -> Rotation3<f64> {
        self.start * self.spec.rotation(angle)
    }

    fn weight_body(&self, angle: f64) -> Vector3<f64> {
        self.attitude(angle).inverse() * Vector3::new(0.0, 0.0, -self.vehicle.gravity * self.vehicle.total_mass)
    }

    fn thrust_torque(&self, f: &[f64; 4]) -> Vector3<f64> {
        self.vehicle.torque_map(&self.spec.rotation_point) * SVector::<f64, 4>::from(*f)
    }

    fn acceleration(&self, angle: f64, f: &[f64; 4]) -> f64 {
        let rho = -self.spec.rotation_point;
        let tau = self.thrust_torque(f) + rho.cross(&self.weight_body(angle));
        self.spec.axis.dot(&tau) / self.j_axis
    }

    /// Minimum-norm hinge reactions consistent with the rigid pivot motion.
    fn reactions(&self, angle: f64, rate: f64, f: &[f64; 4]) -> [Vector3<f64>; 2] {
        let v = self.vehicle;
        let s = self.spec.axis;
        let nr = self.spec.rotation_point;
        let rho = -nr;
        let acc = self.acceleration(angle, f);
        let (alpha, omega) = (s * acc, s * rate);
        let w = self.weight_body(angle);
        let a_com = alpha.cross(&rho) + omega.cross(&omega.cross(&rho));
        let force = a_com * v.total_mass - Vector3::z() * f.iter().sum::<f64>() - w;
        let j = v.inertia_about(&nr);
        let moment = j * alpha + omega.cross(&(j * omega)) - self.thrust_torque(f) - rho.cross(&w);
        let d = self.spec.contact_points.map(|p| p - nr);
        let mut a = SMatrix::<f64, 6, 6>::zeros();
        for k in 0..3 {
            a[(k, k)] = 1.0;
            a[(k, 3 + k)] = 1.0;
        }
        a.fixed_view_mut::<3, 3>(3, 0).copy_from(&d[0].cross_matrix());
        a.fixed_view_mut::<3, 3>(3, 3).copy_from(&d[1].cross_matrix());
        let mut b = SVector::<f64, 6>::zeros();
        b.fixed_rows_mut::<3>(0).copy_from(&force);
        b.fixed_rows_mut::<3>(3).copy_from(&moment);
        let r = a.pseudo_inverse(1e-10).map_or_else(|_| SVector::zeros(), |p| p * b);
        [r.fixed_rows::<3>(0).into_owned(), r.fixed_rows::<3>(3).into_owned()]
    }
}

/// Closed-loop rotation about the hinge with a zero-order-hold controller.
/// Stops at 1.5 T or when the target angle is reached.
pub fn simulate_pivot(
    spec: &RotationSpec,
    vehicle: &VehicleParams,
    traj: &TrajectoryRef,
    gains: &ControllerGains,
    cfg: &PivotConfig,
) -> Result<PivotTrace> {
    if !(cfg.control_rate > 0.0 && cfg.substeps > 0 && cfg.gyro_noise >= 0.0 && cfg.attitude_noise >= 0.0) {
        return Err(Error::InvalidConfig("invalid pivot simulation settings".into()));
    }
    let j_axis = spec.axis.dot(&(vehicle.inertia_about(&spec.rotation_point) * spec.axis));
    let hinge = Hinge { spec, vehicle, start: traj.start, j_axis };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gyro = Normal::new(0.0, cfg.gyro_noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let att = Normal::new(0.0, cfg.attitude_noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let dt = 1.0 / cfg.control_rate;
    let h = dt / cfg.substeps as f64;
    let t_end = 1.5 * traj.duration;
    let (mut t, mut angle, mut rate) = (0.0, cfg.initial_angle, 0.0);
    let mut samples = Vec::new();
    let (mut slips, mut lifts, mut worst) = (0, 0, 0.0f64);
    let tol = 1e-9 * vehicle.total_mass * vehicle.gravity;
    let mut reached = false;
    loop {
        let noise_r = Rotation3::new(Vector3::from_fn(|_, _| att.sample(&mut rng)));
        let measured = hinge.attitude(angle) * noise_r;
        let omega = spec.axis * rate + Vector3::from_fn(|_, _| gyro.sample(&mut rng));
        let cmd = tracking_step(measured.matrix(), &omega, traj, t, gains, vehicle, spec)?;
        let alloc = torque_to_thrust(&cmd.torque, vehicle, spec);
        let f = alloc.thrusts;

        let reactions = hinge.reactions(angle, rate, &f);
        let up = hinge.attitude(angle).inverse() * Vector3::z();
        let normal_forces = reactions.map(|r| r.dot(&up));
        let lift_off = normal_forces.iter().any(|n| *n < -tol);
        let slip = reactions
            .iter()
            .zip(&normal_forces)
            .any(|(r, n)| (r - up * *n).norm() > cfg.friction * n.max(0.0) + tol);
        slips += slip as usize;
        lifts += lift_off as usize;
        let reference = traj.scalar(t).0;
        worst = worst.max((reference - angle).abs());
        samples.push(PivotSample {
            t,
            angle,
            rate,
            reference,
            thrusts: f,
            reactions,
            normal_forces,
            lift_off,
            slip,
            branch: alloc.branch,
        });
        if angle >= spec.angle {
            reached = true;
            break;
        }
        if t >= t_end - 1e-12 {
            break;
        }
        for _ in 0..cfg.substeps {
            let acc = |th: f64| hinge.acceleration(th, &f);
            let (k1x, k1v) = (rate, acc(angle));
            let (k2x, k2v) = (rate + 0.5 * h * k1v, acc(angle + 0.5 * h * k1x));
            let (k3x, k3v) = (rate + 0.5 * h * k2v, acc(angle + 0.5 * h * k2x));
            let (k4x, k4v) = (rate + h * k3v, acc(angle + h * k3x));
            angle += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            rate += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            // The start face's third node keeps the body from tipping back.
            if angle < 0.0 {
                angle = 0.0;
                rate = rate.max(0.0);
            }
        }
        t += dt;
    }
    Ok(PivotTrace {
        samples,
        final_angle: angle,
        final_rate: rate,
        target_angle: spec.angle,
        reached,
        slip_violations: slips,
        lift_off_violations: lifts,
        max_tracking_error: worst,
    })
}

pub fn write_pivot_csv<W: Write>(trace: &PivotTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "time_s", "angle_rad", "rate_rad_per_s", "reference_rad", "f1_n", "f2_n", "f3_n", "f4_n", "normal1_n", "normal2_n",
        "lift_off", "slip",
    ])?;
    for s in &trace.samples {
        let mut row = vec![s.t.to_string(), s.angle.to_string(), s.rate.to_string(), s.reference.to_string()];
        row.extend(s.thrusts.iter().map(f64::to_string));
        row.extend(s.normal_forces.iter().map(f64::to_string));
        row.push(s.lift_off.to_string());
        row.push(s.slip.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
