//! Stress histories, Euler buckling and the structural design check.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ElementForces, Network, SimTrace, StateView};
use crate::error::{Error, Result};
use crate::geometry::{ElementKind, Member, ShellKind, StructureModel};

/// Largest value of one stress family with where and when it occurred.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub element: usize,
    /// Pa
    pub value: f64,
    /// s
    pub time: f64,
}

fn bump(slot: &mut Option<Peak>, element: usize, value: f64, time: f64) {
    if slot.is_none_or(|p| value > p.value) {
        *slot = Some(Peak { element, value, time });
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StressPeaks {
    /// String tension stress (member index).
    pub string: Option<Peak>,
    /// Rod axial stress magnitude (member index).
    pub rod: Option<Peak>,
    /// Joint bending stress (joint index).
    pub bending: Option<Peak>,
    /// Joint combined stress (joint index).
    pub joint: Option<Peak>,
}

impl StressPeaks {
    /// Largest of string, rod-axial and joint-combined stress, Pa.
    pub fn max_stress(&self) -> f64 {
        [self.string, self.rod, self.joint]
            .iter()
            .flatten()
            .map(|p| p.value)
            .fold(0.0, f64::max)
    }
}

/// Per-element stress histories sampled on the trace times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressTrace {
    pub times: Vec<f64>,
    /// Axial stress per member and sample, Pa: T/A for strings (≥ 0),
    /// C/A for rods (compression positive).
    pub axial: Vec<Vec<f64>>,
    pub member_kind: Vec<ElementKind>,
    /// |M| r / I per joint and sample, Pa.
    pub bending: Vec<Vec<f64>>,
    /// Bending plus the larger adjacent rod axial stress, Pa.
    pub joint_combined: Vec<Vec<f64>>,
    pub peaks: StressPeaks,
    /// Smallest distance from any quadcopter node to the deformed shell
    /// surface over the trace, m (tensegrity only).
    pub exposure_distance: Option<f64>,
}

/// Which members meet at every joint, plus hull facets for the exposure check.
#[derive(Clone, Debug)]
pub struct StressLayout {
    joint_members: Vec<[usize; 2]>,
    area: Vec<f64>,
    string: Vec<bool>,
    joint_section: Vec<(f64, f64)>,
    hull: Vec<[usize; 3]>,
    quad: [usize; 4],
    check_exposure: bool,
}

impl StressLayout {
    pub fn new(model: &StructureModel) -> Result<Self> {
        let find = |a: usize, b: usize| {
            model
                .members
                .iter()
                .position(|m| m.is_rod() && m.nodes.contains(&a) && m.nodes.contains(&b))
                .ok_or_else(|| Error::InvalidModel(format!("joint arm {a}-{b} has no rod")))
        };
        let joint_members = model
            .joints
            .iter()
            .map(|j| Ok([find(j.nodes[0], j.nodes[1])?, find(j.nodes[1], j.nodes[2])?]))
            .collect::<Result<_>>()?;
        Ok(Self {
            joint_members,
            area: model.members.iter().map(|m| m.area).collect(),
            string: model.members.iter().map(Member::is_string).collect(),
            joint_section: model.joints.iter().map(|j| (j.outer_radius, j.second_moment)).collect(),
            hull: model.hull_faces.clone(),
            quad: model.quad_nodes,
            check_exposure: model.kind == ShellKind::Icosahedron && !model.hull_faces.is_empty(),
        })
    }

    /// Axial, bending and combined stresses for one force record.
    pub fn stresses(&self, rec: &ElementForces, axial: &mut [f64], bending: &mut [f64], combined: &mut [f64]) {
        for (e, a) in axial.iter_mut().enumerate() {
            *a = if self.string[e] {
                rec.tension[e] / self.area[e]
            } else {
                rec.compression[e] / self.area[e]
            };
        }
        for (q, [m1, m2]) in self.joint_members.iter().enumerate() {
            let (r, i) = self.joint_section[q];
            bending[q] = rec.moment[q].abs() * r / i;
            combined[q] = bending[q] + axial[*m1].max(axial[*m2]);
        }
    }

    /// Smallest distance from a quadcopter node to the shell hull triangles.
    pub fn exposure(&self, positions: &dyn Fn(usize) -> Vector3<f64>) -> Option<f64> {
        if !self.check_exposure {
            return None;
        }
        let mut best = f64::INFINITY;
        for &q in &self.quad {
            let p = positions(q);
            for f in &self.hull {
                let d = point_triangle_distance(&p, &positions(f[0]), &positions(f[1]), &positions(f[2]));
                best = best.min(d);
            }
        }
        Some(best)
    }
}

/// Euclidean distance from `p` to the closed triangle `abc`.
pub fn point_triangle_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    // Ericson, "Real-Time Collision Detection", closest point on triangle.
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

/// Streaming peak tracker fed one sample at a time.
pub struct StressMonitor<'a> {
    network: Network,
    layout: StressLayout,
    model: &'a StructureModel,
    rec: ElementForces,
    scratch: Vec<f64>,
    axial: Vec<f64>,
    bending: Vec<f64>,
    combined: Vec<f64>,
    pub peaks: StressPeaks,
    pub exposure_distance: Option<f64>,
}

impl<'a> StressMonitor<'a> {
    pub fn new(model: &'a StructureModel) -> Result<Self> {
        Ok(Self {
            network: Network::new(model)?,
            layout: StressLayout::new(model)?,
            model,
            rec: ElementForces::default(),
            scratch: vec![0.0; 3 * model.nodes.len()],
            axial: vec![0.0; model.members.len()],
            bending: vec![0.0; model.joints.len()],
            combined: vec![0.0; model.joints.len()],
            peaks: StressPeaks::default(),
            exposure_distance: None,
        })
    }

    pub fn observe(&mut self, s: &StateView<'_>) -> Result<()> {
        self.scratch.iter_mut().for_each(|v| *v = 0.0);
        self.network.internal_forces(s.x, s.v, &mut self.scratch, Some(&mut self.rec))?;
        self.layout.stresses(&self.rec, &mut self.axial, &mut self.bending, &mut self.combined);
        for (e, &a) in self.axial.iter().enumerate() {
            if self.model.members[e].is_string() {
                bump(&mut self.peaks.string, e, a, s.t);
            } else {
                bump(&mut self.peaks.rod, e, a.abs(), s.t);
            }
        }
        for q in 0..self.bending.len() {
            bump(&mut self.peaks.bending, q, self.bending[q], s.t);
            bump(&mut self.peaks.joint, q, self.combined[q], s.t);
        }
        if let Some(d) = self.layout.exposure(&|i| s.position(i)) {
            self.exposure_distance = Some(self.exposure_distance.map_or(d, |e: f64| e.min(d)));
        }
        Ok(())
    }

    /// Last sample's per-element values (axial, bending, combined).
    pub fn current(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.axial, &self.bending, &self.combined)
    }
}

/// Stress histories of every element over a trace.
pub fn extract_stresses(model: &StructureModel, trace: &SimTrace) -> Result<StressTrace> {
    if trace.node_count() != model.nodes.len() || trace.positions.len() != trace.velocities.len() {
        return Err(Error::InvalidInput(format!(
            "trace has {} nodes, model has {}",
            trace.node_count(),
            model.nodes.len()
        )));
    }
    let mut mon = StressMonitor::new(model)?;
    let (nm, nj) = (model.members.len(), model.joints.len());
    let mut axial = vec![Vec::with_capacity(trace.len()); nm];
    let mut bending = vec![Vec::with_capacity(trace.len()); nj];
    let mut joint_combined = vec![Vec::with_capacity(trace.len()); nj];
    for k in 0..trace.len() {
        let x = crate::dynamics::flatten(&trace.positions[k]);
        let v = crate::dynamics::flatten(&trace.velocities[k]);
        mon.observe(&StateView { t: trace.times[k], x: &x, v: &v })?;
        let (a, b, c) = mon.current();
        for e in 0..nm {
            axial[e].push(a[e]);
        }
        for q in 0..nj {
            bending[q].push(b[q]);
            joint_combined[q].push(c[q]);
        }
    }
    Ok(StressTrace {
        times: trace.times.clone(),
        axial,
        member_kind: model.members.iter().map(|m| m.kind).collect(),
        bending,
        joint_combined,
        peaks: mon.peaks,
        exposure_distance: mon.exposure_distance,
    })
}

/// Euler critical stress π² E I / (A L²) of a rod element, Pa.
pub fn buckling_strength(rod: &Member) -> f64 {
    std::f64::consts::PI.powi(2) * rod.youngs_modulus * rod.second_moment
        / (rod.area * rod.rest_length * rod.rest_length)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignLimits {
    pub string_safety: f64,
    pub rod_safety: f64,
    /// Pa
    pub string_yield: f64,
    /// Pa
    pub rod_yield: f64,
    /// Minimum allowed quadcopter-to-shell distance, m.
    pub exposure_threshold: f64,
}

impl DesignLimits {
    /// Safety factors of 1.5, model yield strengths, threshold d/2.
    pub fn for_model(model: &StructureModel, prop_diameter: f64) -> Self {
        Self {
            string_safety: 1.5,
            rod_safety: 1.5,
            string_yield: model.string_material.map_or(f64::INFINITY, |m| m.yield_strength),
            rod_yield: model.rod_material.yield_strength,
            exposure_threshold: prop_diameter / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.string_safety >= 1.0 && self.rod_safety >= 1.0) {
            return Err(Error::InvalidConfig("safety factors must be at least 1".into()));
        }
        if !(self.string_yield > 0.0 && self.rod_yield > 0.0 && self.exposure_threshold >= 0.0) {
            return Err(Error::InvalidConfig("yield strengths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    /// Worst element, when applicable.
    pub element: Option<String>,
    /// Worst factored demand, Pa (or m for exposure).
    pub demand: f64,
    /// Pa (or m for exposure).
    pub limit: f64,
    /// limit / demand; infinite for zero demand. Pass iff > 1.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
    pub exposure_min_distance: Option<f64>,
}

fn criterion(name: &str, element: Option<String>, demand: f64, limit: f64) -> CriterionResult {
    let margin = if demand > 0.0 { limit / demand } else { f64::INFINITY };
    CriterionResult { name: name.into(), element, demand, limit, margin, pass: demand < limit }
}

/// Strict-inequality check of every string, rod and joint sample plus the
/// exposure distance.
pub fn design_check(stress: &StressTrace, limits: &DesignLimits, model: &StructureModel) -> DesignReport {
    let mut criteria = Vec::new();
    let worst = |series: &mut dyn Iterator<Item = (usize, f64, f64)>| {
        // Largest demand / limit ratio: (element, demand, limit).
        series.fold(None::<(usize, f64, f64)>, |best, (e, d, l)| match best {
            Some((_, bd, bl)) if bd * l >= d * bl => best,
            _ => Some((e, d, l)),
        })
    };
    let name = |e: usize| {
        let m = &model.members[e];
        format!("{:?} {}-{}", m.kind, m.nodes[0], m.nodes[1]).to_lowercase()
    };

    if stress.member_kind.contains(&ElementKind::String) {
        let mut it = stress.axial.iter().enumerate().filter(|(e, _)| model.members[*e].is_string()).map(|(e, s)| {
            let peak = s.iter().copied().fold(0.0, f64::max);
            (e, limits.string_safety * peak, limits.string_yield)
        });
        let (e, d, l) = worst(&mut it).unwrap_or((0, 0.0, limits.string_yield));
        criteria.push(criterion("string_yield", Some(name(e)), d, l));
    }

    let mut it = stress.axial.iter().enumerate().filter(|(e, _)| model.members[*e].is_rod()).flat_map(|(e, s)| {
        let member = &model.members[e];
        let peak_abs = s.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let peak_comp = s.iter().copied().fold(0.0, f64::max);
        [
            (e, limits.rod_safety * peak_abs, limits.rod_yield),
            (e, limits.rod_safety * peak_comp, buckling_strength(member)),
        ]
    });
    if let Some((e, d, l)) = worst(&mut it) {
        criteria.push(criterion("rod_yield_buckling", Some(name(e)), d, l));
    }

    let mut it = stress.joint_combined.iter().enumerate().map(|(q, s)| {
        let peak = s.iter().copied().fold(0.0, f64::max);
        (q, limits.rod_safety * peak, limits.rod_yield)
    });
    if let Some((q, d, l)) = worst(&mut it) {
        let j = &model.joints[q];
        criteria.push(criterion("joint_yield", Some(format!("joint {}-{}-{}", j.nodes[0], j.nodes[1], j.nodes[2])), d, l));
    }

    if let Some(dist) = stress.exposure_distance {
        // Demand/limit are inverted: the distance must exceed the threshold.
        let margin = if limits.exposure_threshold > 0.0 { dist / limits.exposure_threshold } else { f64::INFINITY };
        criteria.push(CriterionResult {
            name: "exposure".into(),
            element: None,
            demand: limits.exposure_threshold,
            limit: dist,
            margin,
            pass: dist > limits.exposure_threshold,
        });
    }
    let pass = criteria.iter().all(|c| c.pass);
    DesignReport { criteria, pass, exposure_min_distance: stress.exposure_distance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ElementKind, Member};
    use approx::assert_relative_eq;

    fn solid_rod(r: f64, e: f64, l: f64) -> Member {
        let a = std::f64::consts::PI * r * r;
        Member {
            kind: ElementKind::Rod,
            nodes: [0, 1],
            rest_length: l,
            area: a,
            second_moment: std::f64::consts::PI * r.powi(4) / 4.0,
            outer_radius: r,
            youngs_modulus: e,
            stiffness: e * a / l,
            damping: 0.0,
        }
    }

    #[test]
    fn buckling_reference_value() {
        let s = buckling_strength(&solid_rod(3e-3, 3.2e10, 0.2));
        assert_relative_eq!(s, 1.7765287921960845e7, max_relative = 1e-9);
        let s2 = buckling_strength(&solid_rod(3e-3, 3.2e10, 0.4));
        assert_relative_eq!(s2, s / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn triangle_distance_regions() {
        let a = Vector3::new(0.0, 0.0, 0.0);
        let b = Vector3::new(1.0, 0.0, 0.0);
        let c = Vector3::new(0.0, 1.0, 0.0);
        assert_relative_eq!(point_triangle_distance(&Vector3::new(0.2, 0.2, 0.5), &a, &b, &c), 0.5);
        assert_relative_eq!(point_triangle_distance(&Vector3::new(-1.0, -1.0, 0.0), &a, &b, &c), 2f64.sqrt());
        assert_relative_eq!(point_triangle_distance(&Vector3::new(0.5, -1.0, 0.0), &a, &b, &c), 1.0);
        assert_relative_eq!(point_triangle_distance(&Vector3::new(1.0, 1.0, 0.0), &a, &b, &c), 0.5f64.sqrt(), epsilon = 1e-15);
    }
}
