use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    included_angle, rod_section, ElementKind, Face, FaceKind, Joint, MassBudget, MaterialSpec,
    Member, Node, NodeRole, ShellKind, StructureModel,
};
use crate::error::{Error, Result};
use crate::geometry::hull::convex_hull_facets;

/// Rod cross-section family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RodSection {
    #[default]
    Solid,
    /// Annulus with fixed outer radius; the inner radius follows from the
    /// mass budget.
    Tube { outer_radius: f64 },
}

impl RodSection {
    /// Same family with lengths multiplied by `lambda`.
    pub fn scaled(self, lambda: f64) -> Self {
        match self {
            Self::Solid => Self::Solid,
            Self::Tube { outer_radius } => Self::Tube { outer_radius: outer_radius * lambda },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcosahedronConfig {
    /// Full rod length L, m.
    pub rod_length: f64,
    pub rod_material: MaterialSpec,
    pub string_material: MaterialSpec,
    pub mass: MassBudget,
    /// String pre-tension F_s, N.
    pub pretension: f64,
    /// Quadcopter node offset from the rod center as a fraction of L.
    pub quad_offset: f64,
    #[serde(default)]
    pub rod_section: RodSection,
}

impl IcosahedronConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.rod_length) {
            return Err(Error::InvalidConfig("rod_length must be positive".into()));
        }
        if !pos(self.mass.structure_mass) || !pos(self.mass.quad_mass) {
            return Err(Error::InvalidConfig("structure and quadcopter masses must be positive".into()));
        }
        if !pos(self.mass.rod_string_ratio) {
            return Err(Error::InvalidConfig("rod-string mass ratio must be positive".into()));
        }
        if !(self.pretension >= 0.0 && self.pretension.is_finite()) {
            return Err(Error::InvalidConfig("pretension must be non-negative".into()));
        }
        if !(self.quad_offset > 0.0 && self.quad_offset < 0.5) {
            return Err(Error::InvalidConfig("quad_offset must lie in (0, 0.5)".into()));
        }
        self.rod_material.validate("rod")?;
        self.string_material.validate("string")
    }
}

/// Rod end pairs of the Jessen icosahedron: two rods parallel to each axis.
pub(crate) const JESSEN_RODS: [[usize; 2]; 6] = [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9], [10, 11]];

/// Node coordinates: cyclic permutations of (0, ±L/2, ±L/4), with rods 0–3
/// parallel to x, 4–7 to y and 8–11 to z.
pub(crate) fn jessen_nodes(rod_length: f64) -> [Vector3<f64>; 12] {
    let a = rod_length / 2.0;
    let b = rod_length / 4.0;
    [
        Vector3::new(a, b, 0.0),
        Vector3::new(-a, b, 0.0),
        Vector3::new(a, -b, 0.0),
        Vector3::new(-a, -b, 0.0),
        Vector3::new(0.0, a, b),
        Vector3::new(0.0, -a, b),
        Vector3::new(0.0, a, -b),
        Vector3::new(0.0, -a, -b),
        Vector3::new(b, 0.0, a),
        Vector3::new(b, 0.0, -a),
        Vector3::new(-b, 0.0, a),
        Vector3::new(-b, 0.0, -a),
    ]
}

/// String pairs: every node pair at distance √6·L/4.
pub(crate) fn jessen_strings(nodes: &[Vector3<f64>; 12]) -> Vec<[usize; 2]> {
    let target = (nodes[0] - nodes[8]).norm();
    let mut out = Vec::with_capacity(24);
    for i in 0..12 {
        for j in i + 1..12 {
            if ((nodes[i] - nodes[j]).norm() - target).abs() < 1e-9 * target {
                out.push([i, j]);
            }
        }
    }
    out
}

/// Builds the pre-tensioned tensegrity shell with the quadcopter mounted on
/// the two rods parallel to e_x.
pub fn build_icosahedron(cfg: &IcosahedronConfig) -> Result<StructureModel> {
    cfg.validate()?;
    let l = cfg.rod_length;
    let shell = jessen_nodes(l);
    let strings = jessen_strings(&shell);
    debug_assert_eq!(strings.len(), 24);

    let rod_mass = cfg.mass.rod_mass() / 6.0;
    let string_length = (shell[0] - shell[8]).norm();
    let string_mass = cfg.mass.string_mass() / strings.len() as f64;

    let rod_area = rod_mass / (cfg.rod_material.density * l);
    let (rod_radius, rod_i) = rod_section(rod_area, cfg.rod_section)?;
    let string_area = string_mass / (cfg.string_material.density * string_length);
    let string_radius = (string_area / std::f64::consts::PI).sqrt();

    let mut nodes: Vec<Node> = shell
        .iter()
        .map(|&p| Node {
            position: p,
            mass: 0.5 * rod_mass + 4.0 * 0.5 * string_mass,
            role: NodeRole::Tensegrity,
        })
        .collect();

    let q = cfg.quad_offset * l;
    let b = l / 4.0;
    let quad_positions = [
        Vector3::new(q, b, 0.0),
        Vector3::new(-q, b, 0.0),
        Vector3::new(q, -b, 0.0),
        Vector3::new(-q, -b, 0.0),
    ];
    for p in quad_positions {
        nodes.push(Node {
            position: p,
            mass: cfg.mass.quad_mass / 4.0,
            role: NodeRole::Quadcopter,
        });
    }

    let rod = |i: usize, j: usize, nodes: &[Node]| {
        let length = (nodes[i].position - nodes[j].position).norm();
        Member {
            kind: ElementKind::Rod,
            nodes: [i, j],
            rest_length: length,
            area: rod_area,
            second_moment: rod_i,
            outer_radius: rod_radius,
            youngs_modulus: cfg.rod_material.youngs_modulus,
            stiffness: cfg.rod_material.youngs_modulus * rod_area / length,
            damping: 0.0,
        }
    };
    let mut members = Vec::new();
    // Hosting rods 0-1 and 2-3 are split at the quadcopter nodes.
    for [i, j] in [[0, 12], [12, 13], [13, 1], [2, 14], [14, 15], [15, 3]] {
        members.push(rod(i, j, &nodes));
    }
    for &[i, j] in &JESSEN_RODS[2..] {
        members.push(rod(i, j, &nodes));
    }
    for &[i, j] in &strings {
        members.push(Member {
            kind: ElementKind::String,
            nodes: [i, j],
            rest_length: string_length,
            area: string_area,
            second_moment: 0.0,
            outer_radius: string_radius,
            youngs_modulus: cfg.string_material.youngs_modulus,
            stiffness: cfg.string_material.youngs_modulus * string_area / string_length,
            damping: 0.0,
        });
    }

    let joints = [[0, 12, 13], [12, 13, 1], [2, 14, 15], [14, 15, 3]]
        .into_iter()
        .map(|[i, j, k]| {
            let lij = (nodes[i].position - nodes[j].position).norm();
            let ljk = (nodes[k].position - nodes[j].position).norm();
            Joint {
                nodes: [i, j, k],
                rest_angle: included_angle(&nodes[i].position, &nodes[j].position, &nodes[k].position),
                stiffness: cfg.rod_material.youngs_modulus * rod_i / (lij + ljk),
                damping: 0.0,
                second_moment: rod_i,
                outer_radius: rod_radius,
            }
        })
        .collect();

    let faces = enumerate_faces(&shell, &strings);
    let hull_faces = convex_hull_facets(&shell).into_iter().map(|f| f.nodes).collect();

    let model = StructureModel {
        kind: ShellKind::Icosahedron,
        nodes,
        members,
        joints,
        faces,
        hull_faces,
        rods: JESSEN_RODS.to_vec(),
        quad_nodes: [12, 13, 14, 15],
        prop_handedness: [1.0, -1.0, -1.0, 1.0],
        frame_axes: Matrix3::identity(),
        pretension: 0.0,
        rod_material: cfg.rod_material,
        string_material: Some(cfg.string_material),
    };
    init_pretension(&model, cfg.pretension)
}

/// Triangles of the rod + string graph, normals pointing away from the node
/// centroid.
fn enumerate_faces(shell: &[Vector3<f64>; 12], strings: &[[usize; 2]]) -> Vec<Face> {
    let mut adj = [[None::<FaceKind>; 12]; 12];
    for &[i, j] in strings {
        adj[i][j] = Some(FaceKind::AllString);
        adj[j][i] = Some(FaceKind::AllString);
    }
    for &[i, j] in &JESSEN_RODS {
        adj[i][j] = Some(FaceKind::Rod);
        adj[j][i] = Some(FaceKind::Rod);
    }
    let centroid = shell.iter().sum::<Vector3<f64>>() / 12.0;
    let mut faces = Vec::with_capacity(20);
    for i in 0..12 {
        for j in i + 1..12 {
            for k in j + 1..12 {
                let (Some(e1), Some(e2), Some(e3)) = (adj[i][j], adj[j][k], adj[i][k]) else {
                    continue;
                };
                let kind = if [e1, e2, e3].contains(&FaceKind::Rod) {
                    FaceKind::Rod
                } else {
                    FaceKind::AllString
                };
                let mut normal = (shell[j] - shell[i]).cross(&(shell[k] - shell[i])).normalize();
                let mut tri = [i, j, k];
                let fc = (shell[i] + shell[j] + shell[k]) / 3.0;
                if normal.dot(&(fc - centroid)) < 0.0 {
                    normal = -normal;
                    tri = [i, k, j];
                }
                faces.push(Face { nodes: tri, normal, kind });
            }
        }
    }
    faces
}

/// Sets rest lengths so every string carries `pretension` and the rods
/// carry the compressions that balance every node at the current geometry.
pub fn init_pretension(model: &StructureModel, pretension: f64) -> Result<StructureModel> {
    if model.kind != ShellKind::Icosahedron {
        return Err(Error::InvalidModel("pre-tension applies to the tensegrity shell only".into()));
    }
    if !(pretension >= 0.0 && pretension.is_finite()) {
        return Err(Error::InvalidConfig("pretension must be non-negative".into()));
    }
    let n = model.nodes.len();
    let rod_ids: Vec<usize> = model.rod_members().map(|(e, _)| e).collect();
    let geometric = |m: &Member| (model.nodes[m.nodes[0]].position - model.nodes[m.nodes[1]].position).norm();

    // Column e holds the unit-compression force on every node of rod e.
    let mut a = DMatrix::<f64>::zeros(3 * n, rod_ids.len());
    let mut rhs = DVector::<f64>::zeros(3 * n);
    for (col, &e) in rod_ids.iter().enumerate() {
        let m = &model.members[e];
        let [i, j] = m.nodes;
        let eij = (model.nodes[j].position - model.nodes[i].position) / geometric(m);
        for r in 0..3 {
            a[(3 * i + r, col)] = -eij[r];
            a[(3 * j + r, col)] = eij[r];
        }
    }
    for (_, m) in model.string_members() {
        let [i, j] = m.nodes;
        let eij = (model.nodes[j].position - model.nodes[i].position) / geometric(m);
        for r in 0..3 {
            rhs[3 * i + r] -= pretension * eij[r];
            rhs[3 * j + r] += pretension * eij[r];
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::EquilibriumFailure { residual: f64::INFINITY });
    }
    let c = svd
        .solve(&rhs, 1e-12 * smax)
        .map_err(|e| Error::Solver(e.to_string()))?;
    let residual = (&a * &c - &rhs).norm();
    if residual > 1e-9 * pretension.max(1.0) {
        return Err(Error::EquilibriumFailure { residual });
    }

    let mut out = model.clone();
    for (col, &e) in rod_ids.iter().enumerate() {
        let m = &mut out.members[e];
        let l = geometric(&model.members[e]);
        let ea = m.youngs_modulus * m.area;
        if c[col] >= ea {
            return Err(Error::EquilibriumFailure { residual: c[col] });
        }
        m.set_rest_length(ea * l / (ea - c[col]));
    }
    for m in out.members.iter_mut().filter(|m| m.is_string()) {
        let l = (model.nodes[m.nodes[0]].position - model.nodes[m.nodes[1]].position).norm();
        let ea = m.youngs_modulus * m.area;
        m.set_rest_length(ea * l / (pretension + ea));
    }
    out.pretension = pretension;
    out.update_damping();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn table_config() -> IcosahedronConfig {
        IcosahedronConfig {
            rod_length: 0.2,
            rod_material: MaterialSpec { density: 2000.0, youngs_modulus: 3.2e10, yield_strength: 5e8 },
            string_material: MaterialSpec { density: 1150.0, youngs_modulus: 4.1e9, yield_strength: 8e7 },
            mass: MassBudget { structure_mass: 0.05, quad_mass: 0.25, rod_string_ratio: 20.0 },
            pretension: 20.0,
            quad_offset: 0.25,
            rod_section: RodSection::Solid,
        }
    }

    #[test]
    fn topology_counts() {
        let m = build_icosahedron(&table_config()).unwrap();
        assert_eq!(m.nodes.len(), 16);
        assert_eq!(m.string_members().count(), 24);
        assert_eq!(m.rod_members().count(), 10);
        assert_eq!(m.joints.len(), 4);
        assert_eq!(m.faces.len(), 20);
        assert_eq!(m.faces.iter().filter(|f| f.kind == FaceKind::AllString).count(), 8);
        for i in 0..12 {
            let strings = m.string_members().filter(|(_, s)| s.nodes.contains(&i)).count();
            let rods = m.rods.iter().filter(|r| r.contains(&i)).count();
            assert_eq!((strings, rods), (4, 1));
        }
    }

    #[test]
    fn string_lengths_and_masses() {
        let m = build_icosahedron(&table_config()).unwrap();
        let expected = 6f64.sqrt() / 4.0 * 0.2;
        for (_, s) in m.string_members() {
            let l = (m.nodes[s.nodes[0]].position - m.nodes[s.nodes[1]].position).norm();
            assert_relative_eq!(l, expected, max_relative = 1e-12);
        }
        assert_relative_eq!(m.total_mass(), 0.3, max_relative = 1e-9);
        let cfg = table_config();
        assert_relative_eq!(cfg.mass.rod_mass(), 0.047619047619, max_relative = 1e-9);
        assert_relative_eq!(cfg.mass.string_mass(), 0.002380952381, max_relative = 1e-9);
    }

    #[test]
    fn zero_pretension_keeps_geometric_lengths() {
        let mut cfg = table_config();
        cfg.pretension = 0.0;
        let m = build_icosahedron(&cfg).unwrap();
        for e in &m.members {
            let l = (m.nodes[e.nodes[0]].position - m.nodes[e.nodes[1]].position).norm();
            assert_relative_eq!(e.rest_length, l, max_relative = 1e-15);
        }
    }

    #[test]
    fn joints_are_straight() {
        let m = build_icosahedron(&table_config()).unwrap();
        for j in &m.joints {
            assert_relative_eq!(j.rest_angle, std::f64::consts::PI, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = table_config();
        cfg.quad_offset = 0.5;
        assert!(matches!(build_icosahedron(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = table_config();
        cfg.rod_length = 0.0;
        assert!(matches!(build_icosahedron(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = table_config();
        cfg.rod_section = RodSection::Tube { outer_radius: 1e-4 };
        assert!(matches!(build_icosahedron(&cfg), Err(Error::InfeasibleGeometry(_))));
    }
}
