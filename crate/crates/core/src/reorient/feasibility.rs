use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::lp::{LinearProgram, LpOutcome};
use super::{RotationSpec, VehicleParams};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeasibilityOptions {
    /// Facets of the inscribed friction pyramid.
    pub friction_facets: usize,
    /// Additionally require Σ f_i = 0.
    pub zero_sum: bool,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self { friction_facets: 16, zero_sum: false }
    }
}

/// Thrusts and the two hinge reactions (body frame, N).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub thrusts: [f64; 4],
    pub reactions: [Vector3<f64>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub witness: Option<Witness>,
    /// Largest constraint violation of the witness under the exact cone.
    pub violation: Option<f64>,
}

/// Unit vectors spanning the plane orthogonal to `n`.
pub(crate) fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let t1 = n.cross(&Vector3::ith(n.iamin(), 1.0)).normalize();
    (t1, n.cross(&t1))
}

/// Edge balance program; variables f(4), r1(3), r2(3) and, when
/// `mass_var`, the added mass.
fn edge_program(spec: &RotationSpec, v: &VehicleParams, mu: f64, opts: &FeasibilityOptions, mass_var: bool) -> LinearProgram {
    let n = if mass_var { 11 } else { 10 };
    let mut lp = LinearProgram::new(n);
    for i in 0..4 {
        lp.bounds(i, v.thrust_min, v.thrust_max);
    }
    let va = spec.ground_normal;
    let gv = -va * v.gravity; // weight per kg
    let nr = spec.rotation_point;
    let map = v.torque_map(&nr);
    let d = spec.contact_points.map(|p| p - nr);
    let tau_g = nr.cross(&gv); // S(n_r)·w per kg

    for k in 0..3 {
        let mut row = vec![0.0; n];
        (0..4).for_each(|i| row[i] = if k == 2 { 1.0 } else { 0.0 });
        row[4 + k] = 1.0;
        row[7 + k] = 1.0;
        if mass_var {
            row[10] = gv[k];
        }
        lp.eq(row, -v.total_mass * gv[k]);
    }
    for k in 0..3 {
        let mut row = vec![0.0; n];
        (0..4).for_each(|i| row[i] = map[(k, i)]);
        for (j, dj) in d.iter().enumerate() {
            // e_k·(d × r) = (e_k × d)·r
            let coef = Vector3::ith(k, 1.0).cross(dj);
            for c in 0..3 {
                row[4 + 3 * j + c] = coef[c];
            }
        }
        if mass_var {
            row[10] = -tau_g[k];
        }
        lp.eq(row, v.total_mass * tau_g[k]);
    }
    for j in 0..2 {
        let mut row = vec![0.0; n];
        (0..3).for_each(|c| row[4 + 3 * j + c] = -va[c]);
        lp.le(row, 0.0);
    }
    if mu.is_finite() && opts.friction_facets >= 3 {
        let (t1, t2) = tangent_basis(&va);
        let k = opts.friction_facets as f64;
        let reach = mu * (std::f64::consts::PI / k).cos();
        for f in 0..opts.friction_facets {
            let phi = 2.0 * std::f64::consts::PI * f as f64 / k;
            let dir = t1 * phi.cos() + t2 * phi.sin() - va * reach;
            for j in 0..2 {
                let mut row = vec![0.0; n];
                (0..3).for_each(|c| row[4 + 3 * j + c] = dir[c]);
                lp.le(row, 0.0);
            }
        }
    }
    if opts.zero_sum {
        let mut row = vec![0.0; n];
        (0..4).for_each(|i| row[i] = 1.0);
        lp.eq(row, 0.0);
    }
    lp
}

fn witness_from(x: &[f64]) -> Witness {
    Witness {
        thrusts: [x[0], x[1], x[2], x[3]],
        reactions: [Vector3::new(x[4], x[5], x[6]), Vector3::new(x[7], x[8], x[9])],
    }
}

/// Existence of thrusts and hinge reactions holding the vehicle in balance
/// at the onset of the rotation; `mu = ∞` drops the friction limit.
pub fn check_rotation_feasibility(
    spec: &RotationSpec,
    vehicle: &VehicleParams,
    mu: f64,
    opts: &FeasibilityOptions,
) -> Result<FeasibilityResult> {
    match edge_program(spec, vehicle, mu, opts, false).solve()? {
        LpOutcome::Optimal { x, .. } => {
            let w = witness_from(&x);
            let violation = verify_witness(spec, vehicle, mu, &w, opts.zero_sum);
            Ok(FeasibilityResult { feasible: true, witness: Some(w), violation: Some(violation) })
        }
        _ => Ok(FeasibilityResult { feasible: false, witness: None, violation: None }),
    }
}

/// Largest mass (kg) that can be added at the centre of mass with the
/// rotation still feasible; capped at 100× the vehicle mass. `None` if the
/// rotation is infeasible even for a weightless vehicle.
pub fn rotation_capacity(
    spec: &RotationSpec,
    vehicle: &VehicleParams,
    mu: f64,
    opts: &FeasibilityOptions,
) -> Result<Option<f64>> {
    let mut lp = edge_program(spec, vehicle, mu, opts, true);
    lp.bounds(10, -vehicle.total_mass, 100.0 * vehicle.total_mass);
    lp.objective[10] = -1.0;
    Ok(match lp.solve()? {
        LpOutcome::Optimal { x, .. } => Some(x[10]),
        LpOutcome::Unbounded => Some(100.0 * vehicle.total_mass),
        LpOutcome::Infeasible => None,
    })
}

/// Largest violation of the balance, contact, exact friction-cone and
/// thrust-box conditions by a witness.
pub fn verify_witness(spec: &RotationSpec, v: &VehicleParams, mu: f64, w: &Witness, zero_sum: bool) -> f64 {
    let va = spec.ground_normal;
    let weight = -va * (v.gravity * v.total_mass);
    let ez = Vector3::z();
    let nr = spec.rotation_point;
    let sum: f64 = w.thrusts.iter().sum();
    let force = ez * sum + w.reactions[0] + w.reactions[1] + weight;
    let map = v.torque_map(&nr);
    let mut moment = -nr.cross(&weight);
    for i in 0..4 {
        moment += map.column(i) * w.thrusts[i];
    }
    for j in 0..2 {
        moment += (spec.contact_points[j] - nr).cross(&w.reactions[j]);
    }
    let mut worst = force.norm().max(moment.norm());
    for r in &w.reactions {
        let normal = r.dot(&va);
        worst = worst.max(-normal);
        if mu.is_finite() {
            worst = worst.max((r - va * normal).norm() - mu * normal);
        }
    }
    for f in &w.thrusts {
        worst = worst.max(v.thrust_min - f).max(f - v.thrust_max);
    }
    if zero_sum {
        worst = worst.max(sum.abs());
    }
    worst.max(0.0)
}
