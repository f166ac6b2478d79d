use approx::assert_relative_eq;
use nalgebra::{Rotation3, Vector3};
use tensegrity_core::dynamics::{
    accelerations, contact_forces, element_forces, mechanical_energy, run_collision, simulate, CollisionScenario,
    ContactModel, Network, SimSettings,
};
use tensegrity_core::geometry::{build_icosahedron, ElementKind, StructureModel};
use tensegrity_core::ode::StepControl;
use tensegrity_core::params;
use tensegrity_core::study::orientation_from_direction;

fn reference() -> StructureModel {
    build_icosahedron(&params::icosahedron_config()).unwrap()
}

fn wall() -> ContactModel {
    ContactModel::new(Vector3::x(), 0.0, params::WALL_STIFFNESS).unwrap()
}

fn collision(model: StructureModel, orientation: Rotation3<f64>, contact: ContactModel, duration: f64) -> CollisionScenario {
    CollisionScenario {
        model,
        orientation,
        speed: params::SPEED,
        contact: Some(contact),
        duration,
        settings: SimSettings::default(),
    }
}

#[test]
fn string_and_rod_force_laws() {
    let m = reference();
    let x0 = m.positions();
    let v = vec![Vector3::zeros(); x0.len()];
    let (s_idx, s) = m.string_members().next().unwrap();
    let (r_idx, r) = m.rod_members().find(|(_, r)| r.nodes[0] < 12 && r.nodes[1] < 12).unwrap();

    let place = |x: &mut Vec<Vector3<f64>>, nodes: [usize; 2], len: f64| {
        let dir = (x[nodes[1]] - x[nodes[0]]).normalize();
        x[nodes[1]] = x[nodes[0]] + dir * len;
    };
    let mut x = x0.clone();
    place(&mut x, s.nodes, s.rest_length);
    assert_eq!(element_forces(&m, &x, &v).unwrap().tension[s_idx], 0.0);
    place(&mut x, s.nodes, 0.9 * s.rest_length);
    assert_eq!(element_forces(&m, &x, &v).unwrap().tension[s_idx], 0.0);

    let mut x = x0;
    let delta = 1e-5;
    place(&mut x, r.nodes, r.rest_length - delta);
    let c = element_forces(&m, &x, &v).unwrap().compression[r_idx];
    let rod_e = params::rod_material().youngs_modulus;
    assert_relative_eq!(c, r.stiffness * delta, max_relative = 1e-6);
    assert_relative_eq!(c, rod_e * r.area * delta / r.rest_length, max_relative = 1e-6);
}

#[test]
fn rigid_translation_under_mass_proportional_load() {
    let m = reference();
    let x = m.positions();
    let v = vec![Vector3::zeros(); x.len()];
    let g = Vector3::new(1.0, -2.0, 0.5);
    let u: Vec<Vector3<f64>> = m.nodes.iter().map(|n| g * n.mass).collect();
    let total: Vector3<f64> = u.iter().sum();
    for a in accelerations(&m, &x, &v, &u).unwrap() {
        assert_relative_eq!(a, total / m.total_mass(), epsilon = 1e-6);
    }
}

#[test]
fn single_free_node() {
    let mut m = reference();
    m.nodes.truncate(1);
    m.nodes[0].mass = 0.1;
    m.members.clear();
    m.joints.clear();
    let a = accelerations(&m, &[Vector3::zeros()], &[Vector3::zeros()], &[Vector3::new(1.0, 0.0, 0.0)]).unwrap();
    assert_relative_eq!(a[0], Vector3::new(10.0, 0.0, 0.0), epsilon = 1e-12);
}

#[test]
fn penalty_contact_values() {
    let c = wall();
    let f = contact_forces(&c, &[Vector3::new(-1e-3, 0.0, 0.0), Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.2, 1.0, 0.0)]);
    assert_relative_eq!(f[0].norm(), 4.7e4, max_relative = 1e-12);
    assert_relative_eq!(f[0].normalize(), Vector3::x(), epsilon = 1e-15);
    assert_eq!(f[1], Vector3::zeros());
    assert_eq!(f[2], Vector3::zeros());
}

#[test]
fn internal_forces_sum_to_zero() {
    let m = reference();
    let net = Network::new(&m).unwrap();
    let mut x: Vec<f64> = m.positions().iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    for (k, xi) in x.iter_mut().enumerate() {
        *xi += 1e-3 * ((k as f64 * 1.7).sin());
    }
    let v: Vec<f64> = (0..x.len()).map(|k| (k as f64 * 0.3).cos()).collect();
    let mut f = vec![0.0; x.len()];
    net.internal_forces(&x, &v, &mut f, None).unwrap();
    let sum: Vector3<f64> = f.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).sum();
    let scale = f.iter().map(|q| q.abs()).fold(0.0, f64::max);
    assert!(sum.norm() <= 1e-12 * scale, "net internal force {sum:?}");
}

#[test]
fn resting_vehicle_stays_put() {
    let mut s = collision(reference(), Rotation3::identity(), wall(), 0.01);
    s.speed = 0.0;
    let tr = run_collision(&s).unwrap();
    let x0 = &tr.positions[0];
    let worst = tr
        .positions
        .iter()
        .flat_map(|x| x.iter().zip(x0).map(|(a, b)| (a - b).norm()))
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "drift {worst}");
}

#[test]
fn undamped_free_motion_conserves_energy() {
    let m = reference().without_damping();
    let net = Network::new(&m).unwrap();
    let mut x = m.positions();
    for (k, p) in x.iter_mut().enumerate().take(12) {
        *p += Vector3::new((k as f64).sin(), (k as f64 * 2.0).cos(), 0.5) * 2e-4;
    }
    let v: Vec<Vector3<f64>> = (0..x.len()).map(|k| Vector3::new(0.0, 0.1 * (k as f64).cos(), 0.0)).collect();
    let e0 = mechanical_energy(&m, None, &x, &v).unwrap();
    let settings = SimSettings { rtol: 1e-8, atol: 1e-11, output_interval: 1e-4, ..Default::default() };
    let mut worst: f64 = 0.0;
    simulate(&net, None, &x, &v, 0.02, &settings, |s| {
        let n = s.x.len() / 3;
        let xs: Vec<_> = (0..n).map(|i| s.position(i)).collect();
        let vs: Vec<_> = (0..n).map(|i| s.velocity(i)).collect();
        let e = mechanical_energy(&m, None, &xs, &vs).unwrap();
        worst = worst.max((e - e0).abs() / e0);
        StepControl::Continue
    })
    .unwrap();
    assert!(worst < 1e-3, "relative energy drift {worst}");
}

#[test]
fn damped_energy_decays_after_separation() {
    let model = reference();
    let mut s = collision(model.clone(), Rotation3::identity(), wall(), 0.03);
    s.settings.stop_on_separation = false;
    let tr = run_collision(&s).unwrap();
    let sep = tr.separation_time.expect("vehicle should leave the wall");
    let c = wall();
    let mut last = f64::INFINITY;
    for (k, &t) in tr.times.iter().enumerate() {
        if t < sep {
            continue;
        }
        let e = mechanical_energy(&model, Some(&c), &tr.positions[k], &tr.velocities[k]).unwrap();
        assert!(e <= last * (1.0 + 1e-6), "energy rose at t = {t}: {e} > {last}");
        last = e;
    }
}

#[test]
fn momentum_change_equals_contact_impulse() {
    let model = reference();
    let s = collision(model.clone(), Rotation3::identity(), wall(), 0.01);
    let tr = run_collision(&s).unwrap();
    let c = wall();
    let momentum = |k: usize| -> Vector3<f64> {
        model.nodes.iter().zip(&tr.velocities[k]).map(|(n, v)| v * n.mass).sum()
    };
    let force = |k: usize| -> Vector3<f64> { contact_forces(&c, &tr.positions[k]).iter().sum() };
    let mut impulse = Vector3::zeros();
    let mut worst: f64 = 0.0;
    let p0 = momentum(0);
    let scale = model.total_mass() * params::SPEED;
    for k in 1..tr.len() {
        impulse += (force(k) + force(k - 1)) * 0.5 * (tr.times[k] - tr.times[k - 1]);
        worst = worst.max((momentum(k) - p0 - impulse).norm() / scale);
    }
    assert!(worst < 2e-2, "momentum audit error {worst}");
}

#[test]
fn slack_strings_carry_no_tension() {
    let model = reference();
    let u = Vector3::new(1.0, 0.0, 0.0);
    let s = collision(model.clone(), orientation_from_direction(&u, &Vector3::x()), wall(), 0.005);
    let tr = run_collision(&s).unwrap();
    for k in (0..tr.len()).step_by(10) {
        let f = element_forces(&model, &tr.positions[k], &tr.velocities[k]).unwrap();
        for (e, mem) in model.members.iter().enumerate().filter(|(_, m)| m.kind == ElementKind::String) {
            let [i, j] = mem.nodes;
            let len = (tr.positions[k][i] - tr.positions[k][j]).norm();
            assert_eq!(f.tension[e] * (mem.rest_length - len).max(0.0), 0.0);
        }
    }
}

#[test]
fn element_forces_are_frame_invariant() {
    let model = reference();
    let orient = Rotation3::from_euler_angles(0.3, -0.2, 0.7);
    let q = Rotation3::from_euler_angles(-1.1, 0.4, 2.0);
    let a = collision(model.clone(), orient, wall(), 0.002);
    let c = ContactModel::new(q * Vector3::x(), 0.0, params::WALL_STIFFNESS).unwrap();
    let b = collision(model.clone(), q * orient, c, 0.002);
    let (ta, tb) = (run_collision(&a).unwrap(), run_collision(&b).unwrap());
    assert_eq!(ta.len(), tb.len());
    for k in (0..ta.len()).step_by(20) {
        let fa = element_forces(&model, &ta.positions[k], &ta.velocities[k]).unwrap();
        let peak = fa.tension.iter().chain(&fa.compression).fold(1.0f64, |m, x| m.max(x.abs()));
        let same = |fb: &tensegrity_core::dynamics::ElementForces, tol: f64| {
            for (x, y) in fa.tension.iter().zip(&fb.tension).chain(fa.compression.iter().zip(&fb.compression)) {
                assert!((x - y).abs() <= tol * peak, "{x} vs {y}");
            }
        };
        // Same state seen from a rotated frame.
        let xr: Vec<_> = ta.positions[k].iter().map(|p| q * p).collect();
        let vr: Vec<_> = ta.velocities[k].iter().map(|p| q * p).collect();
        same(&element_forces(&model, &xr, &vr).unwrap(), 1e-9);
        // Independently integrated rotated run; adaptive steps differ slightly.
        same(&element_forces(&model, &tb.positions[k], &tb.velocities[k]).unwrap(), 1e-3);
    }
}
