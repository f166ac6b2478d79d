use approx::assert_relative_eq;
use nalgebra::{Matrix3, Vector3};
use tensegrity_core::dynamics::{accelerations, element_forces};
use tensegrity_core::geometry::{
    build_icosahedron, build_propeller_guard, compute_inertia, face_stability, load_model, min_enclosing_rod_length,
    save_model, ElementKind, FaceKind, FaceStability, NodeRole, StructureModel,
};
use tensegrity_core::params;

fn reference() -> StructureModel {
    build_icosahedron(&params::icosahedron_config()).unwrap()
}

fn with_length(l: f64, pretension: f64) -> StructureModel {
    let cfg = tensegrity_core::geometry::IcosahedronConfig { rod_length: l, pretension, ..params::icosahedron_config() };
    build_icosahedron(&cfg).unwrap()
}

/// Cyclic permutations of (0, ±L/2, ±L/4).
fn jessen_oracle(l: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let (a, b) = (s1 * l / 2.0, s2 * l / 4.0);
            out.push(Vector3::new(0.0, a, b));
            out.push(Vector3::new(b, 0.0, a));
            out.push(Vector3::new(a, b, 0.0));
        }
    }
    out
}

/// Inside test over every supporting plane through three points.
fn inside_hull(points: &[Vector3<f64>], p: &Vector3<f64>) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let nrm = (points[j] - points[i]).cross(&(points[k] - points[i]));
                if nrm.norm() < 1e-12 {
                    continue;
                }
                let side: Vec<f64> = points.iter().map(|q| nrm.dot(&(q - points[i]))).collect();
                let tol = 1e-12 * nrm.norm();
                let all_neg = side.iter().all(|s| *s <= tol);
                let all_pos = side.iter().all(|s| *s >= -tol);
                let s = nrm.dot(&(p - points[i]));
                if (all_neg && s > tol) || (all_pos && s < -tol) {
                    return false;
                }
            }
        }
    }
    true
}

#[test]
fn node_positions_match_closed_form() {
    let m = with_length(0.2, 20.0);
    let oracle = jessen_oracle(0.2);
    for n in m.nodes.iter().filter(|n| n.role == NodeRole::Tensegrity) {
        assert!(oracle.iter().any(|q| (q - n.position).norm() < 1e-12), "unexpected node {:?}", n.position);
    }
    for (_, s) in m.string_members() {
        let [i, j] = s.nodes;
        let len = (m.nodes[i].position - m.nodes[j].position).norm();
        assert_relative_eq!(len, 0.122474487, epsilon = 1e-9);
        assert_relative_eq!(len, 6f64.sqrt() / 4.0 * 0.2, max_relative = 1e-12);
    }
}

#[test]
fn topology_and_incidence() {
    let m = reference();
    assert_eq!(m.shell_nodes().len(), 12);
    assert_eq!(m.string_members().count(), 24);
    assert_eq!(m.rods.len(), 6);
    for i in m.shell_nodes() {
        let strings = m.string_members().filter(|(_, s)| s.nodes.contains(&i)).count();
        let rods = m.rods.iter().filter(|r| r.contains(&i)).count();
        assert_eq!((strings, rods), (4, 1), "node {i}");
    }
    let (nr, ns) = m.connectivity();
    assert_eq!(nr, nr.transpose());
    assert_eq!(ns, ns.transpose());
    for i in 0..nr.nrows() {
        for j in 0..nr.ncols() {
            assert!(nr[(i, j)] == 0 || ns[(i, j)] == 0);
        }
    }
}

#[test]
fn faces_count_orient_and_border_edges() {
    let m = reference();
    assert_eq!(m.faces.len(), 20);
    assert_eq!(m.faces.iter().filter(|f| f.kind == FaceKind::AllString).count(), 8);
    let shell = m.shell_nodes();
    let centroid = shell.iter().map(|&i| m.nodes[i].position).sum::<Vector3<f64>>() / 12.0;
    for f in &m.faces {
        let fc = f.nodes.iter().map(|&i| m.nodes[i].position).sum::<Vector3<f64>>() / 3.0;
        assert!(f.normal.dot(&(fc - centroid)) > 0.0);
        assert_relative_eq!(f.normal.norm(), 1.0, epsilon = 1e-12);
        let rod_edges = (0..3)
            .filter(|&k| {
                let e = [f.nodes[k], f.nodes[(k + 1) % 3]];
                m.rods.iter().any(|r| (r[0] == e[0] && r[1] == e[1]) || (r[0] == e[1] && r[1] == e[0]))
            })
            .count();
        assert_eq!(rod_edges, if f.kind == FaceKind::Rod { 1 } else { 0 });
    }
    let borders = |a: usize, b: usize| -> Vec<FaceKind> {
        m.faces.iter().filter(|f| f.nodes.contains(&a) && f.nodes.contains(&b)).map(|f| f.kind).collect()
    };
    for (_, s) in m.string_members() {
        let mut k = borders(s.nodes[0], s.nodes[1]);
        k.sort_by_key(|x| *x == FaceKind::Rod);
        assert_eq!(k, vec![FaceKind::AllString, FaceKind::Rod]);
    }
    for r in &m.rods {
        assert_eq!(borders(r[0], r[1]), vec![FaceKind::Rod, FaceKind::Rod]);
    }
}

#[test]
fn mass_budget_split() {
    let m = reference();
    assert_relative_eq!(m.total_mass(), 0.30, max_relative = 1e-9);
    let budget = params::mass_budget();
    assert_relative_eq!(budget.rod_mass(), 0.047619, epsilon = 1e-6);
    assert_relative_eq!(budget.string_mass(), 0.002381, epsilon = 1e-6);
    let shell: f64 = m.nodes.iter().filter(|n| n.role == NodeRole::Tensegrity).map(|n| n.mass).sum();
    assert_relative_eq!(shell, 0.05, max_relative = 1e-9);
}

#[test]
fn element_constants_follow_material_laws() {
    let m = reference();
    let cfg = params::icosahedron_config();
    for mem in &m.members {
        let e = match mem.kind {
            ElementKind::Rod => cfg.rod_material.youngs_modulus,
            ElementKind::String => cfg.string_material.youngs_modulus,
            ElementKind::Joint => continue,
        };
        assert_relative_eq!(mem.stiffness * mem.rest_length, e * mem.area, max_relative = 1e-9);
        let [i, j] = mem.nodes;
        let (mi, mj) = (m.nodes[i].mass, m.nodes[j].mass);
        let mu = mi * mj / (mi + mj);
        assert_relative_eq!(mem.damping, 2.0 * (mem.stiffness * mu).sqrt(), max_relative = 1e-12);
    }
    for j in &m.joints {
        let p = |k: usize| m.nodes[j.nodes[k]].position;
        let span = (p(0) - p(1)).norm() + (p(2) - p(1)).norm();
        assert_relative_eq!(j.stiffness * span, cfg.rod_material.youngs_modulus * j.second_moment, max_relative = 1e-12);
    }
}

#[test]
fn pretension_balances_rods() {
    let m = reference();
    let x = m.positions();
    let v = vec![Vector3::zeros(); x.len()];
    let forces = element_forces(&m, &x, &v).unwrap();
    for (e, mem) in m.members.iter().enumerate() {
        match mem.kind {
            ElementKind::String => assert_relative_eq!(forces.tension[e], 20.0, max_relative = 1e-9),
            ElementKind::Rod => assert_relative_eq!(forces.compression[e], 6f64.sqrt() * 20.0, max_relative = 1e-2),
            ElementKind::Joint => {}
        }
    }
    let acc = accelerations(&m, &x, &v, &vec![Vector3::zeros(); x.len()]).unwrap();
    let worst = acc.iter().map(|a| a.norm()).fold(0.0, f64::max);
    assert!(worst < 1e-6 * 9.81, "residual {worst}");
}

#[test]
fn zero_pretension_is_unstressed() {
    let m = with_length(0.2, 0.0);
    let x = m.positions();
    let v = vec![Vector3::zeros(); x.len()];
    let f = element_forces(&m, &x, &v).unwrap();
    assert!(f.tension.iter().chain(&f.compression).all(|t| t.abs() < 1e-9));
}

#[test]
fn minimum_enclosing_length_matches_sweep() {
    let (d, q) = (params::PROP_DIAMETER, params::QUAD_OFFSET);
    let l = min_enclosing_rod_length(d, q, 0.0);
    let encloses = |len: f64| {
        let pts = jessen_oracle(len);
        [(q, 1.0), (-q, 1.0), (q, -1.0), (-q, -1.0)].iter().all(|&(qx, sy)| {
            let c = Vector3::new(qx * len, sy * len / 4.0, 0.0);
            (0..96).all(|k| {
                let a = k as f64 * std::f64::consts::TAU / 96.0;
                inside_hull(&pts, &(c + Vector3::new(a.cos(), a.sin(), 0.0) * d / 2.0))
            })
        })
    };
    // 0.1 mm sweep
    let mut sweep = None;
    for k in 0..4000 {
        let len = 0.2 + k as f64 * 1e-4;
        if encloses(len) {
            sweep = Some(len);
            break;
        }
    }
    let sweep = sweep.expect("sweep found no enclosing length");
    assert!((l - sweep).abs() < 5e-4, "bisection {l} vs sweep {sweep}");
    assert_relative_eq!(l, 0.28174, epsilon = 5e-4);
    assert_relative_eq!(min_enclosing_rod_length(2.0 * d, q, 0.0), 2.0 * l, max_relative = 1e-6);
    assert!(min_enclosing_rod_length(1e-9, q, 0.0) < 1e-6);
}

#[test]
fn inertia_cases() {
    let m = reference();
    let com = m.center_of_mass();
    let j = compute_inertia(&m, &com);
    let off = j[(0, 1)].abs().max(j[(0, 2)].abs()).max(j[(1, 2)].abs());
    assert!(off <= 1e-12 * j.norm());
    // Parallel axis, recomputed directly.
    let p = Vector3::new(0.03, -0.01, 0.02);
    let direct = m.nodes.iter().fold(Matrix3::zeros(), |acc, n| {
        let r = n.position - p;
        acc + (Matrix3::identity() * r.norm_squared() - r * r.transpose()) * n.mass
    });
    assert_relative_eq!(compute_inertia(&m, &p), direct, max_relative = 1e-12);
    let q = com - p;
    let shifted = j + (Matrix3::identity() * q.norm_squared() - q * q.transpose()) * m.total_mass();
    assert_relative_eq!(compute_inertia(&m, &p), shifted, max_relative = 1e-12);
}

#[test]
fn inertia_scales_with_fifth_power() {
    let cfg = params::icosahedron_config();
    let base = build_icosahedron(&cfg).unwrap();
    let lambda = 2.0;
    let mut big_cfg = cfg.clone();
    big_cfg.rod_length *= lambda;
    big_cfg.mass.structure_mass *= lambda.powi(3);
    big_cfg.mass.quad_mass *= lambda.powi(3);
    let big = build_icosahedron(&big_cfg).unwrap();
    let a = compute_inertia(&base, &base.center_of_mass());
    let b = compute_inertia(&big, &big.center_of_mass());
    assert_relative_eq!(b, a * lambda.powi(5), max_relative = 1e-9);
}

#[test]
fn face_stability_matches_projection_oracle() {
    let m = reference();
    let st = face_stability(&m).unwrap();
    let com = m.center_of_mass();
    for (f, face) in m.faces.iter().enumerate() {
        let [a, b, c] = face.nodes.map(|i| m.nodes[i].position);
        let proj = com - face.normal * face.normal.dot(&(com - a));
        // Barycentric sign test.
        let s = |p: Vector3<f64>, q: Vector3<f64>| (q - p).cross(&(proj - p)).dot(&face.normal);
        let inside = s(a, b) > 0.0 && s(b, c) > 0.0 && s(c, a) > 0.0;
        assert_eq!(st[f] == FaceStability::Stable, inside, "face {f}");
        let expect = if face.kind == FaceKind::AllString { FaceStability::Stable } else { FaceStability::Unstable };
        assert_eq!(st[f], expect);
    }
}

#[test]
fn shifted_com_makes_face_stable() {
    let mut m = reference();
    let rod_face = m.faces.iter().position(|f| f.kind == FaceKind::Rod).unwrap();
    let target = m.faces[rod_face].nodes.map(|i| m.nodes[i].position).iter().sum::<Vector3<f64>>() / 3.0;
    // Move the COM onto the face centroid with a heavy quad node there.
    let q = m.quad_nodes[0];
    let (total, mq) = (m.total_mass(), m.nodes[q].mass);
    let rest = m.center_of_mass() * total - m.nodes[q].position * mq;
    let heavy = 1e3 * total;
    m.nodes[q].mass = heavy;
    m.nodes[q].position = (target * (total - mq + heavy) - rest) / heavy;
    let com = m.center_of_mass();
    assert!((com - target).norm() < 1e-9, "{:?} vs {:?}", com, target);
    assert_eq!(face_stability(&m).unwrap()[rod_face], FaceStability::Stable);
}

#[test]
fn guard_mass_symmetry_and_joints() {
    let g = build_propeller_guard(&params::guard_config()).unwrap();
    assert_relative_eq!(g.total_mass(), 0.30, max_relative = 1e-9);
    let hub = g.nodes.iter().position(|n| n.role == NodeRole::Hub).unwrap();
    assert!((g.center_of_mass() - g.nodes[hub].position).norm() < 1e-12);
}

#[test]
fn model_file_roundtrip() {
    let m = reference();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&path, &m).unwrap();
    assert_eq!(load_model(&path).unwrap(), m);
}
