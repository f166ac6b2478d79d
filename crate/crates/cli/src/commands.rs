use std::collections::BTreeSet;

use nalgebra::{Rotation3, Vector3};
use serde::Serialize;
use tensegrity_core::dynamics::{
    run_collision, write_trace_csv, CollisionScenario, ContactModel, TraceSummary,
};
use tensegrity_core::geometry::{build_icosahedron, build_propeller_guard, StructureModel};
use tensegrity_core::reorient::{
    build_face_graph, converter_error_map, default_goal_faces, payload_margin, plan_paths, reference_trajectory,
    resting_attitude, rotation_spec, simulate_pivot, write_error_map_csv, write_pivot_csv, FeasibilityOptions,
    FaceGraph, ReorientPlan, VehicleParams,
};
use tensegrity_core::stress::{design_check, extract_stresses, DesignLimits, DesignReport, StressPeaks};
use tensegrity_core::study::{
    orientation_from_direction, run_study, scale_study, write_scale_csv, write_study_csv, StudyAggregates, StudyConfig,
};

use crate::config::{CollisionBlock, ConfigError, NamedDirection, RunConfig, Shell};
use crate::output::Staging;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] tensegrity_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use tensegrity_core::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Core(E::InvalidConfig(_) | E::InvalidInput(_) | E::InvalidPair(..) | E::InfeasibleGeometry(_)) => 2,
            _ => 1,
        }
    }
}

pub type CmdResult = Result<bool, CliError>;

/// Rod-perpendicular, node-first and string-face-first impacts.
pub fn default_orientations() -> Vec<NamedDirection> {
    let d = |name: &str, v: Vector3<f64>| {
        let u = v.normalize();
        NamedDirection { name: name.into(), direction: [u.x, u.y, u.z] }
    };
    vec![
        d("rod_perpendicular", Vector3::x()),
        d("node_first", Vector3::new(2.0, 1.0, 0.0)),
        d("string_face_first", Vector3::new(1.0, 1.0, 1.0)),
    ]
}

fn collision_model(block: &CollisionBlock) -> Result<StructureModel, CliError> {
    Ok(match block.shell {
        Shell::Tensegrity => build_icosahedron(&block.tensegrity)?,
        Shell::Guard => build_propeller_guard(&block.guard)?,
    })
}

fn scenarios(block: &CollisionBlock, model: &StructureModel) -> Result<Vec<(NamedDirection, CollisionScenario)>, CliError> {
    let dirs = if block.orientations.is_empty() { default_orientations() } else { block.orientations.clone() };
    let normal = Vector3::x();
    dirs.into_iter()
        .map(|nd| {
            let u = Vector3::from(nd.direction);
            if !(u.norm() > 0.0 && u.iter().all(|c| c.is_finite())) {
                return Err(ConfigError::Invalid(format!("orientation `{}` has no direction", nd.name)).into());
            }
            if nd.name.is_empty() || !nd.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(ConfigError::Invalid(format!("orientation name `{}` must be [A-Za-z0-9_-]+", nd.name)).into());
            }
            let sc = CollisionScenario {
                model: model.clone(),
                orientation: orientation_from_direction(&u, &normal),
                speed: block.speed,
                contact: Some(ContactModel::new(normal, 0.0, block.wall_stiffness)?),
                duration: block.duration,
                settings: block.settings,
            };
            sc.validate()?;
            Ok((nd, sc))
        })
        .collect()
}

#[derive(Serialize)]
struct OrientationReport<'a> {
    orientation: &'a str,
    direction: [f64; 3],
    separation_time_s: Option<f64>,
    peaks: StressPeaks,
    report: DesignReport,
}

pub fn design_check_cmd(cfg: &RunConfig, out: &mut Staging) -> CmdResult {
    let model = collision_model(&cfg.collision)?;
    // The exposure threshold is half the propeller diameter of the guard design.
    let base = DesignLimits::for_model(&model, cfg.collision.guard.prop_diameter);
    let l = &cfg.limits;
    let limits = DesignLimits {
        string_safety: l.string_safety,
        rod_safety: l.rod_safety,
        string_yield: l.string_yield.unwrap_or(base.string_yield),
        rod_yield: l.rod_yield.unwrap_or(base.rod_yield),
        exposure_threshold: l.exposure_threshold.unwrap_or(base.exposure_threshold),
    };
    limits.validate()?;
    let mut reports = Vec::new();
    for (nd, sc) in scenarios(&cfg.collision, &model)? {
        let trace = run_collision(&sc)?;
        let stress = extract_stresses(&model, &trace)?;
        let report = design_check(&stress, &limits, &model);
        log::info!("{}: pass {}", nd.name, report.pass);
        reports.push((nd, trace.separation_time, stress.peaks, report));
    }
    print_table(&reports);
    let pass = reports.iter().all(|r| r.3.pass);
    let doc: Vec<_> = reports
        .iter()
        .map(|(nd, sep, peaks, report)| OrientationReport {
            orientation: &nd.name,
            direction: nd.direction,
            separation_time_s: *sep,
            peaks: *peaks,
            report: report.clone(),
        })
        .collect();
    out.write_json("design_report.json", &doc)?;
    Ok(pass)
}

fn print_table(reports: &[(NamedDirection, Option<f64>, StressPeaks, DesignReport)]) {
    println!("{:<20} {:<20} {:<18} {:>12} {:>12} {:>9}  verdict", "orientation", "criterion", "element", "demand", "limit", "margin");
    for (nd, _, _, rep) in reports {
        for c in &rep.criteria {
            println!(
                "{:<20} {:<20} {:<18} {:>12.4e} {:>12.4e} {:>9.3}  {}",
                nd.name,
                c.name,
                c.element.as_deref().unwrap_or("-"),
                c.demand,
                c.limit,
                c.margin,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
    }
    let all = reports.iter().all(|r| r.3.pass);
    println!("overall: {}", if all { "PASS" } else { "FAIL" });
}

#[derive(Serialize)]
struct CollideEntry<'a> {
    orientation: &'a str,
    direction: [f64; 3],
    trace_file: String,
    summary: TraceSummary,
    peaks: StressPeaks,
    exposure_distance_m: Option<f64>,
}

pub fn collide_cmd(cfg: &RunConfig, out: &mut Staging) -> CmdResult {
    let model = collision_model(&cfg.collision)?;
    let mut entries = Vec::new();
    let runs = scenarios(&cfg.collision, &model)?;
    for (nd, sc) in &runs {
        let trace = run_collision(sc)?;
        let stress = extract_stresses(&model, &trace)?;
        let file = format!("collide_{}.csv", nd.name);
        out.write(&file, |w| write_trace_csv(&trace, w))?;
        entries.push(CollideEntry {
            orientation: &nd.name,
            direction: nd.direction,
            trace_file: file,
            summary: TraceSummary::from(&trace),
            peaks: stress.peaks,
            exposure_distance_m: stress.exposure_distance,
        });
    }
    out.write_json("collide_summary.json", &entries)?;
    Ok(true)
}

fn study_config(cfg: &RunConfig, samples: usize) -> StudyConfig {
    let s = &cfg.study;
    StudyConfig {
        samples,
        seed: cfg.seed,
        speed: s.speed,
        wall_stiffness: s.wall_stiffness,
        duration: s.duration,
        settings: s.settings,
        tensegrity: s.tensegrity.clone(),
        guard: s.guard.clone(),
        scale_factors: s.scale_factors.clone(),
        workers: None,
    }
}

#[derive(Serialize)]
struct StudySummary<'a> {
    seed: u64,
    samples: usize,
    aggregates: &'a StudyAggregates,
}

pub fn montecarlo_cmd(cfg: &RunConfig, out: &mut Staging) -> CmdResult {
    let sc = study_config(cfg, cfg.study.samples);
    sc.validate()?;
    let result = run_study(&sc)?;
    out.write("montecarlo_samples.csv", |w| write_study_csv(&result, w))?;
    out.write_json(
        "montecarlo_summary.json",
        &StudySummary { seed: result.seed, samples: result.samples.len(), aggregates: &result.aggregates },
    )?;
    Ok(true)
}

pub fn scale_study_cmd(cfg: &RunConfig, out: &mut Staging) -> CmdResult {
    let sc = study_config(cfg, cfg.study.scale_samples);
    sc.validate()?;
    if sc.scale_factors.is_empty() {
        return Err(ConfigError::Invalid("scale study needs at least one scale factor".into()).into());
    }
    let points = scale_study(&sc, &sc.scale_factors)?;
    out.write("scale_study.csv", |w| write_scale_csv(&points, w))?;
    out.write_json("scale_study.json", &points)?;
    Ok(true)
}

struct Vehicle {
    model: StructureModel,
    params: VehicleParams,
    goals: Vec<usize>,
    opts: FeasibilityOptions,
    friction: f64,
}

fn vehicle(cfg: &RunConfig) -> Result<Vehicle, CliError> {
    let v = &cfg.vehicle;
    let model = build_icosahedron(&v.shell)?;
    let mount = Rotation3::new(Vector3::from(v.mount_rotation));
    let params = VehicleParams::from_model(&model, v.thrust_max, v.thrust_min, v.torque_coeff, mount)?;
    let goals = if v.goal_faces.is_empty() { default_goal_faces(&model, &params)? } else { v.goal_faces.clone() };
    let opts = FeasibilityOptions { friction_facets: v.friction_facets, zero_sum: false };
    Ok(Vehicle { model, params, goals, opts, friction: v.friction })
}

fn plan(v: &Vehicle) -> Result<(FaceGraph, ReorientPlan), CliError> {
    let graph = build_face_graph(&v.model, &v.params, v.friction, &v.goals, &v.opts)?;
    let plan = plan_paths(&graph);
    Ok((graph, plan))
}

#[derive(Serialize)]
struct EdgeOut {
    from: usize,
    to: usize,
    capacity_kg: f64,
    thrusts_n: [f64; 4],
    witness_violation: f64,
}

#[derive(Serialize)]
struct MarginOut {
    margin_kg: Option<f64>,
    bottleneck: Option<(usize, usize)>,
}

#[derive(Serialize)]
struct PlanOut {
    goal_faces: Vec<usize>,
    edges: Vec<EdgeOut>,
    stranded: Vec<usize>,
    paths: Vec<Option<Vec<usize>>>,
    unreachable: Vec<usize>,
    payload_margin: MarginOut,
    payload_margin_zero_sum: MarginOut,
}

pub fn reorient_plan_cmd(cfg: &RunConfig, out: &mut Staging) -> CmdResult {
    let v = vehicle(cfg)?;
    let (graph, plan) = plan(&v)?;
    let margin = |zero_sum: bool| -> Result<MarginOut, CliError> {
        let opts = FeasibilityOptions { zero_sum, ..v.opts };
        let m = payload_margin(&v.model, &v.params, v.friction, &v.goals, &opts)?;
        Ok(MarginOut { margin_kg: m.margin, bottleneck: m.bottleneck })
    };
    let doc = PlanOut {
        goal_faces: graph.goal_faces.clone(),
        edges: graph
            .edges
            .iter()
            .map(|e| EdgeOut {
                from: e.from,
                to: e.to,
                capacity_kg: e.capacity,
                thrusts_n: e.witness.thrusts,
                witness_violation: e.violation,
            })
            .collect(),
        stranded: graph.stranded.clone(),
        paths: plan.paths.clone(),
        unreachable: plan.unreachable.clone(),
        payload_margin: margin(false)?,
        payload_margin_zero_sum: margin(true)?,
    };
    out.write_json("reorient_plan.json", &doc)?;
    out.write("reorient_capacities.csv", |w| -> Result<(), CliError> {
        writeln!(w, "from_face,to_face,rotation_angle_rad,capacity_kg,feasible")?;
        for c in &graph.capacities {
            let spec = rotation_spec(&v.model, &v.params.mount_rotation, c.from, c.to)?;
            let feasible = graph.edges.iter().any(|e| (e.from, e.to) == (c.from, c.to));
            let cap = c.capacity.map_or_else(String::new, |x| x.to_string());
            writeln!(w, "{},{},{},{},{}", c.from, c.to, spec.angle, cap, feasible)?;
        }
        Ok(())
    })?;
    if !plan.unreachable.is_empty() {
        log::warn!("faces {:?} cannot reach the goal faces {:?}", plan.unreachable, graph.goal_faces);
    }
    Ok(plan.unreachable.is_empty())
}

/// Every consecutive face pair on the planned paths, sorted.
pub fn planned_rotations(plan: &ReorientPlan) -> Vec<[usize; 2]> {
    let mut set = BTreeSet::new();
    for (start, path) in plan.paths.iter().enumerate() {
        let Some(path) = path else { continue };
        let mut a = start;
        for &b in path {
            set.insert([a, b]);
            a = b;
        }
    }
    set.into_iter().collect()
}

#[derive(Serialize)]
struct PivotOut {
    from: usize,
    to: usize,
    file: String,
    target_deg: f64,
    final_deg: f64,
    final_rate_rad_per_s: f64,
    thrust_min_n: f64,
    thrust_max_n: f64,
    slip_violations: usize,
    lift_off_violations: usize,
    max_tracking_error_deg: f64,
    pass: bool,
}

pub fn pivot_sim_cmd(cfg: &RunConfig, out: &mut Staging) -> CmdResult {
    let v = vehicle(cfg)?;
    let rotations = if cfg.pivot.rotations.is_empty() {
        planned_rotations(&plan(&v)?.1)
    } else {
        cfg.pivot.rotations.clone()
    };
    let sim = tensegrity_core::reorient::PivotConfig { seed: cfg.seed, ..cfg.pivot.sim };
    let mut summary = Vec::new();
    for [a, b] in rotations {
        let spec = rotation_spec(&v.model, &v.params.mount_rotation, a, b)?;
        let traj = reference_trajectory(&spec, cfg.pivot.duration, resting_attitude(&spec))?;
        let trace = simulate_pivot(&spec, &v.params, &traj, &cfg.pivot.gains, &sim)?;
        let file = format!("pivot_{a}_{b}.csv");
        out.write(&file, |w| write_pivot_csv(&trace, w))?;
        let thrusts = || trace.samples.iter().flat_map(|s| s.thrusts);
        let (lo, hi) = (thrusts().fold(f64::INFINITY, f64::min), thrusts().fold(f64::NEG_INFINITY, f64::max));
        let within = lo >= v.params.thrust_min - 1e-9 && hi <= v.params.thrust_max + 1e-9;
        let err = (trace.final_angle - spec.angle).abs().to_degrees();
        let pass = err < cfg.pivot.tolerance_deg && within && trace.slip_violations == 0;
        summary.push(PivotOut {
            from: a,
            to: b,
            file,
            target_deg: spec.angle.to_degrees(),
            final_deg: trace.final_angle.to_degrees(),
            final_rate_rad_per_s: trace.final_rate,
            thrust_min_n: lo,
            thrust_max_n: hi,
            slip_violations: trace.slip_violations,
            lift_off_violations: trace.lift_off_violations,
            max_tracking_error_deg: trace.max_tracking_error.to_degrees(),
            pass,
        });
    }
    let pass = summary.iter().all(|s| s.pass);
    out.write_json("pivot_summary.json", &summary)?;
    Ok(pass)
}

pub fn thrust_map_cmd(cfg: &RunConfig, out: &mut Staging) -> CmdResult {
    let v = vehicle(cfg)?;
    let tm = &cfg.thrust_map;
    let [a, b] = match tm.rotation {
        Some(r) => r,
        None => [v.goals[0], v.model.face_neighbors(v.goals[0])[0]],
    };
    let (ax1, ax2) = (tm.axis1.values(), tm.axis2.values());
    if ax1.is_empty() || ax2.is_empty() || ax1.iter().chain(&ax2).any(|x| !x.is_finite()) {
        return Err(ConfigError::Invalid("thrust map axes need at least one finite point".into()).into());
    }
    let spec = rotation_spec(&v.model, &v.params.mount_rotation, a, b)?;
    let cells = converter_error_map(&v.params, &spec, &ax1, &ax2);
    out.write("thrust_map.csv", |w| write_error_map_csv(&cells, w))?;
    Ok(true)
}
