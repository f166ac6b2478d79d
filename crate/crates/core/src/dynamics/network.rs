use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::StructureModel;

/// Below this distance two nodes are treated as coincident.
pub const MIN_SEPARATION: f64 = 1e-9;
/// Joints closer than this (in sin of the included angle) to straight
/// produce no bending force; the perpendicular directions are undefined.
pub const STRAIGHT_TOLERANCE: f64 = 1e-6;

/// Per-element force values at one instant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ElementForces {
    /// String tension T per member, N (zero for rods and slack strings).
    pub tension: Vec<f64>,
    /// Rod compression C per member, N (negative when stretched; zero for strings).
    pub compression: Vec<f64>,
    /// Damping force D per member, N (positive pulls the ends together).
    pub damping: Vec<f64>,
    /// Joint moment M per joint, N·m (positive opens the joint back
    /// toward its rest angle when bent below it).
    pub moment: Vec<f64>,
    /// Bending node forces (f_i, f_j, f_k) per joint, N.
    pub bending: Vec<[Vector3<f64>; 3]>,
}

impl ElementForces {
    fn resize(&mut self, members: usize, joints: usize) {
        self.tension.resize(members, 0.0);
        self.compression.resize(members, 0.0);
        self.damping.resize(members, 0.0);
        self.moment.resize(joints, 0.0);
        self.bending.resize(joints, [Vector3::zeros(); 3]);
    }
}

#[derive(Clone, Debug)]
struct MemberData {
    i: usize,
    j: usize,
    rest: f64,
    k: f64,
    c: f64,
    string: bool,
}

#[derive(Clone, Debug)]
struct JointData {
    i: usize,
    j: usize,
    k: usize,
    xi: f64,
    theta0: f64,
    c: f64,
}

/// Flattened element data used by the force evaluation hot loop.
#[derive(Clone, Debug)]
pub struct Network {
    n: usize,
    inv_mass: Vec<f64>,
    members: Vec<MemberData>,
    joints: Vec<JointData>,
}

#[inline]
fn get(a: &[f64], i: usize) -> Vector3<f64> {
    Vector3::new(a[3 * i], a[3 * i + 1], a[3 * i + 2])
}

#[inline]
fn add(a: &mut [f64], i: usize, f: &Vector3<f64>) {
    a[3 * i] += f.x;
    a[3 * i + 1] += f.y;
    a[3 * i + 2] += f.z;
}

impl Network {
    pub fn new(model: &StructureModel) -> Result<Self> {
        if let Some((i, _)) = model.nodes.iter().enumerate().find(|(_, n)| !(n.mass > 0.0)) {
            return Err(Error::InvalidModel(format!("node {i} has non-positive mass")));
        }
        Ok(Self {
            n: model.nodes.len(),
            inv_mass: model.nodes.iter().map(|n| 1.0 / n.mass).collect(),
            members: model
                .members
                .iter()
                .map(|m| MemberData {
                    i: m.nodes[0],
                    j: m.nodes[1],
                    rest: m.rest_length,
                    k: m.stiffness,
                    c: m.damping,
                    string: m.is_string(),
                })
                .collect(),
            joints: model
                .joints
                .iter()
                .map(|j| JointData {
                    i: j.nodes[0],
                    j: j.nodes[1],
                    k: j.nodes[2],
                    xi: j.stiffness,
                    theta0: j.rest_angle,
                    c: j.damping,
                })
                .collect(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn inv_mass(&self) -> &[f64] {
        &self.inv_mass
    }

    /// Accumulates internal node forces into `f` (flattened, length 3n).
    /// Optionally records per-element values.
    pub fn internal_forces(
        &self,
        x: &[f64],
        v: &[f64],
        f: &mut [f64],
        mut record: Option<&mut ElementForces>,
    ) -> Result<()> {
        if let Some(r) = record.as_deref_mut() {
            r.resize(self.members.len(), self.joints.len());
        }
        for (e, m) in self.members.iter().enumerate() {
            let d = get(x, m.j) - get(x, m.i);
            let len = d.norm();
            if len < MIN_SEPARATION {
                return Err(Error::SingularGeometry { i: m.i, j: m.j, distance: len });
            }
            let eij = d / len;
            let (tension, compression) = if m.string {
                (if len >= m.rest { m.k * (len - m.rest) } else { 0.0 }, 0.0)
            } else {
                (0.0, m.k * (m.rest - len))
            };
            let damping = m.c * (get(v, m.j) - get(v, m.i)).dot(&eij);
            let fi = eij * (tension - compression + damping);
            add(f, m.i, &fi);
            add(f, m.j, &(-fi));
            if let Some(r) = record.as_deref_mut() {
                r.tension[e] = tension;
                r.compression[e] = compression;
                r.damping[e] = damping;
            }
        }
        for (q, jt) in self.joints.iter().enumerate() {
            let xj = get(x, jt.j);
            let a = get(x, jt.i) - xj;
            let b = get(x, jt.k) - xj;
            let (la, lb) = (a.norm(), b.norm());
            if la < MIN_SEPARATION || lb < MIN_SEPARATION {
                let (other, dist) = if la < MIN_SEPARATION { (jt.i, la) } else { (jt.k, lb) };
                return Err(Error::SingularGeometry { i: other, j: jt.j, distance: dist });
            }
            let (ea, eb) = (a / la, b / lb);
            let cross = ea.cross(&eb).norm();
            let theta = cross.atan2(ea.dot(&eb));
            let mut out = [Vector3::zeros(); 3];
            let mut moment = 0.0;
            if cross >= STRAIGHT_TOLERANCE {
                // Unit directions that close the joint angle.
                let pa = (eb - ea * eb.dot(&ea)) / cross;
                let pb = (ea - eb * ea.dot(&eb)) / cross;
                let vj = get(v, jt.j);
                let theta_dot =
                    -pa.dot(&(get(v, jt.i) - vj)) / la - pb.dot(&(get(v, jt.k) - vj)) / lb;
                moment = jt.xi * (theta - jt.theta0) + jt.c * theta_dot;
                let fi = pa * (moment / la);
                let fk = pb * (moment / lb);
                let fj = -(fi + fk);
                add(f, jt.i, &fi);
                add(f, jt.k, &fk);
                add(f, jt.j, &fj);
                out = [fi, fj, fk];
            }
            if let Some(r) = record.as_deref_mut() {
                r.moment[q] = moment;
                r.bending[q] = out;
            }
        }
        Ok(())
    }

    /// Elastic energy stored in members and joints.
    pub fn elastic_energy(&self, x: &[f64]) -> f64 {
        let mut energy = 0.0;
        for m in &self.members {
            let len = (get(x, m.j) - get(x, m.i)).norm();
            let stretch = len - m.rest;
            if !m.string || stretch > 0.0 {
                energy += 0.5 * m.k * stretch * stretch;
            }
        }
        for jt in &self.joints {
            let xj = get(x, jt.j);
            let a = get(x, jt.i) - xj;
            let b = get(x, jt.k) - xj;
            let theta = a.cross(&b).norm().atan2(a.dot(&b));
            energy += 0.5 * jt.xi * (theta - jt.theta0).powi(2);
        }
        energy
    }
}

pub(crate) fn flatten(v: &[Vector3<f64>]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

pub(crate) fn unflatten(v: &[f64]) -> Vec<Vector3<f64>> {
    v.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect()
}

fn check_lengths(model: &StructureModel, positions: &[Vector3<f64>], velocities: &[Vector3<f64>]) -> Result<()> {
    let n = model.nodes.len();
    if positions.len() != n || velocities.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected {n} node states, got {} positions and {} velocities",
            positions.len(),
            velocities.len()
        )));
    }
    Ok(())
}

/// Tension, compression, damping and joint bending of every element.
pub fn element_forces(
    model: &StructureModel,
    positions: &[Vector3<f64>],
    velocities: &[Vector3<f64>],
) -> Result<ElementForces> {
    check_lengths(model, positions, velocities)?;
    let net = Network::new(model)?;
    let mut f = vec![0.0; 3 * net.n];
    let mut rec = ElementForces::default();
    net.internal_forces(&flatten(positions), &flatten(velocities), &mut f, Some(&mut rec))?;
    Ok(rec)
}

/// Node accelerations from Newton's second law with external forces `u`.
pub fn accelerations(
    model: &StructureModel,
    positions: &[Vector3<f64>],
    velocities: &[Vector3<f64>],
    external: &[Vector3<f64>],
) -> Result<Vec<Vector3<f64>>> {
    check_lengths(model, positions, velocities)?;
    if external.len() != model.nodes.len() {
        return Err(Error::InvalidInput("external force count mismatch".into()));
    }
    let net = Network::new(model)?;
    let mut f = flatten(external);
    net.internal_forces(&flatten(positions), &flatten(velocities), &mut f, None)?;
    Ok(unflatten(&f)
        .into_iter()
        .zip(&net.inv_mass)
        .map(|(f, w)| f * *w)
        .collect())
}
