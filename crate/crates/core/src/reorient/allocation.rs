use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix3x4, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::{RotationSpec, VehicleParams};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationBranch {
    /// Minimum-norm thrusts reproducing the torque exactly.
    Exact,
    /// Box-constrained least torque error.
    LeastError,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThrustAllocation {
    /// N
    pub thrusts: [f64; 4],
    /// Realized torque about the rotation point, N·m.
    pub torque: Vector3<f64>,
    /// ‖τ_p − τ_d‖, N·m
    pub residual: f64,
    /// Some thrust sits at a bound.
    pub saturated: bool,
    pub branch: AllocationBranch,
}

const RANK_TOL: f64 = 1e-10;

fn finish(map: &Matrix3x4<f64>, f: Vector4<f64>, tau: &Vector3<f64>, v: &VehicleParams, branch: AllocationBranch) -> ThrustAllocation {
    let torque = map * f;
    let tol = 1e-12 * (v.thrust_max - v.thrust_min).abs().max(1.0);
    ThrustAllocation {
        thrusts: [f[0], f[1], f[2], f[3]],
        torque,
        residual: (torque - tau).norm(),
        saturated: f.iter().any(|x| (x - v.thrust_min).abs() <= tol || (x - v.thrust_max).abs() <= tol),
        branch,
    }
}

/// Exact minimum-norm solution within the box, if one exists.
fn exact_branch(map: &Matrix3x4<f64>, tau: &Vector3<f64>, v: &VehicleParams) -> Option<Vector4<f64>> {
    let svd = map.transpose().svd(true, true);
    let s = svd.singular_values;
    if s.min() <= RANK_TOL * s.max().max(1e-300) {
        return None;
    }
    let fp = map.pseudo_inverse(0.0).ok()? * tau;
    // Null direction: the unit vector orthogonal to the row space.
    let u = svd.u?; // 4×3, columns span row space of the map
    let mut n = Vector4::new(1.0, 0.0, 0.0, 0.0);
    let mut best = 0.0;
    for k in 0..4 {
        let e = Vector4::ith(k, 1.0);
        let r = e - u * (u.transpose() * e);
        if r.norm() > best {
            best = r.norm();
            n = r;
        }
    }
    n /= n.norm();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..4 {
        let (a, b) = (v.thrust_min - fp[i], v.thrust_max - fp[i]);
        if n[i].abs() < 1e-14 {
            if a > 1e-12 || b < -1e-12 {
                return None;
            }
        } else {
            let (x, y) = (a / n[i], b / n[i]);
            lo = lo.max(x.min(y));
            hi = hi.min(x.max(y));
        }
    }
    if lo > hi {
        return None;
    }
    let f = fp + n * 0.0f64.clamp(lo, hi);
    Some(f.map(|x| x.clamp(v.thrust_min, v.thrust_max)))
}

/// Box-constrained least squares by enumerating every lower/upper/free
/// pattern; ties prefer the smaller thrust norm.
fn least_error_branch(map: &Matrix3x4<f64>, tau: &Vector3<f64>, v: &VehicleParams) -> Vector4<f64> {
    let mut best: Option<(f64, f64, Vector4<f64>)> = None;
    for code in 0..81usize {
        let mut pattern = [0u8; 4];
        let mut c = code;
        for p in &mut pattern {
            *p = (c % 3) as u8;
            c /= 3;
        }
        let mut f = Vector4::zeros();
        let free: Vec<usize> = (0..4).filter(|&i| pattern[i] == 2).collect();
        for i in 0..4 {
            match pattern[i] {
                0 => f[i] = v.thrust_min,
                1 => f[i] = v.thrust_max,
                _ => {}
            }
        }
        if !free.is_empty() {
            let rhs = tau - map * f;
            let a = DMatrix::from_fn(3, free.len(), |r, c| map[(r, free[c])]);
            let Ok(pinv) = a.pseudo_inverse(1e-12) else { continue };
            let x = pinv * DVector::from_column_slice(rhs.as_slice());
            let tol = 1e-12 * (v.thrust_max - v.thrust_min).abs().max(1.0);
            if x.iter().any(|val| *val < v.thrust_min - tol || *val > v.thrust_max + tol) {
                continue;
            }
            for (k, &i) in free.iter().enumerate() {
                f[i] = x[k].clamp(v.thrust_min, v.thrust_max);
            }
        }
        let err = (map * f - tau).norm();
        let norm = f.norm_squared();
        let better = match &best {
            None => true,
            Some((be, bn, _)) => err < be - 1e-13 || (err <= be + 1e-13 && norm < bn - 1e-15),
        };
        if better {
            best = Some((err, norm, f));
        }
    }
    best.map_or_else(Vector4::zeros, |b| b.2)
}

/// Minimum-norm exact allocation when the torque is reachable within the
/// thrust box, otherwise the box-constrained least-error allocation.
pub fn torque_to_thrust(tau: &Vector3<f64>, vehicle: &VehicleParams, spec: &RotationSpec) -> ThrustAllocation {
    let map = vehicle.torque_map(&spec.rotation_point);
    match exact_branch(&map, tau, vehicle) {
        Some(f) => finish(&map, f, tau, vehicle, AllocationBranch::Exact),
        None => finish(&map, least_error_branch(&map, tau, vehicle), tau, vehicle, AllocationBranch::LeastError),
    }
}

fn clamp_box(f: Vector4<f64>, v: &VehicleParams) -> Vector4<f64> {
    f.map(|x| x.clamp(v.thrust_min, v.thrust_max))
}

/// Torque map augmented with Σf = 0, solved directly, then clamped.
pub fn zero_sum_clamped(tau: &Vector3<f64>, vehicle: &VehicleParams, spec: &RotationSpec) -> ThrustAllocation {
    let map = vehicle.torque_map(&spec.rotation_point);
    let mut a = Matrix4::zeros();
    a.fixed_view_mut::<3, 4>(0, 0).copy_from(&map);
    a.row_mut(3).fill(1.0);
    let b = Vector4::new(tau.x, tau.y, tau.z, 0.0);
    let f = a
        .lu()
        .solve(&b)
        .filter(|f| f.iter().all(|x| x.is_finite()))
        .unwrap_or_else(|| a.pseudo_inverse(1e-12).map_or_else(|_| Vector4::zeros(), |p| p * b));
    finish(&map, clamp_box(f, vehicle), tau, vehicle, AllocationBranch::LeastError)
}

/// Pseudoinverse solution, then clamped.
pub fn pinv_clamped(tau: &Vector3<f64>, vehicle: &VehicleParams, spec: &RotationSpec) -> ThrustAllocation {
    let map = vehicle.torque_map(&spec.rotation_point);
    let f = map.pseudo_inverse(1e-12).map_or_else(|_| Vector4::zeros(), |p| p * tau);
    finish(&map, clamp_box(f, vehicle), tau, vehicle, AllocationBranch::LeastError)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMapCell {
    /// Torque component along the rotation axis, N·m.
    pub axis1: f64,
    /// Torque component along the hinge-to-COM direction, N·m.
    pub axis2: f64,
    pub zero_sum: f64,
    pub pseudoinverse: f64,
    pub optimization: f64,
}

/// Error rate ‖τ_p − τ_d‖/‖τ_d‖ of the three converters over a torque
/// grid spanned by the rotation axis and the hinge-to-COM direction.
pub fn converter_error_map(
    vehicle: &VehicleParams,
    spec: &RotationSpec,
    axis1: &[f64],
    axis2: &[f64],
) -> Vec<ErrorMapCell> {
    let e1 = spec.axis;
    let to_com = -spec.rotation_point;
    let e2 = (to_com - e1 * e1.dot(&to_com)).normalize();
    let mut cells = Vec::with_capacity(axis1.len() * axis2.len());
    for &a in axis1 {
        for &b in axis2 {
            let tau = e1 * a + e2 * b;
            let n = tau.norm();
            let rate = |al: ThrustAllocation| if n > 0.0 { al.residual / n } else { 0.0 };
            cells.push(ErrorMapCell {
                axis1: a,
                axis2: b,
                zero_sum: rate(zero_sum_clamped(&tau, vehicle, spec)),
                pseudoinverse: rate(pinv_clamped(&tau, vehicle, spec)),
                optimization: rate(torque_to_thrust(&tau, vehicle, spec)),
            });
        }
    }
    cells
}

pub fn write_error_map_csv<W: Write>(cells: &[ErrorMapCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis1_torque_nm", "axis2_torque_nm", "error_rate_zero_sum", "error_rate_pseudoinverse", "error_rate_optimization"])?;
    for c in cells {
        w.write_record([
            c.axis1.to_string(),
            c.axis2.to_string(),
            c.zero_sum.to_string(),
            c.pseudoinverse.to_string(),
            c.optimization.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
