use std::io::Write;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::contact::ContactModel;
use super::network::{flatten, unflatten, Network};
use crate::error::{Error, Result};
use crate::geometry::StructureModel;
use crate::ode::{integrate, RadauOptions, SecondOrderSystem, SolverStats, StepControl};

/// Integrator tolerances and output/termination settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Dense-output sampling interval, s.
    pub output_interval: f64,
    /// Contact-free, receding time required to declare separation, s.
    pub separation_window: f64,
    /// Stop once separation is detected.
    pub stop_on_separation: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-9,
            output_interval: 5e-6,
            separation_window: 2e-3,
            stop_on_separation: true,
        }
    }
}

impl SimSettings {
    fn radau(&self) -> RadauOptions {
        RadauOptions {
            rtol: self.rtol,
            atol: self.atol,
            initial_step: 1e-7,
            max_step: self.output_interval * 20.0,
            block: 3,
            ..Default::default()
        }
    }
}

/// Vehicle moving along `-wall_normal` into a wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionScenario {
    pub model: StructureModel,
    /// Body-to-world rotation.
    pub orientation: Rotation3<f64>,
    /// m/s
    pub speed: f64,
    /// `None` removes the wall (free flight).
    pub contact: Option<ContactModel>,
    /// t_max, s
    pub duration: f64,
    pub settings: SimSettings,
}

impl CollisionScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::InvalidConfig("speed must be non-negative".into()));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidConfig("duration must be positive".into()));
        }
        let s = &self.settings;
        if !(s.rtol > 0.0 && s.atol > 0.0 && s.output_interval > 0.0 && s.separation_window >= 0.0) {
            return Err(Error::InvalidConfig("integrator settings must be positive".into()));
        }
        if let Some(c) = &self.contact {
            c.validate()?;
        }
        self.model.validate()
    }

    /// World-frame initial node positions and velocities: the closest node
    /// touches the wall with zero penetration, all nodes move at `-speed·n`.
    pub fn initial_state(&self) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        let com = self.model.center_of_mass();
        let mut x: Vec<Vector3<f64>> = self
            .model
            .nodes
            .iter()
            .map(|n| self.orientation * (n.position - com))
            .collect();
        let normal = self.contact.map(|c| c.wall_normal).unwrap_or_else(Vector3::x);
        if let Some(c) = &self.contact {
            let closest = x.iter().map(|p| c.wall_normal.dot(p)).fold(f64::INFINITY, f64::min);
            let shift = c.wall_normal * (c.wall_offset - closest);
            x.iter_mut().for_each(|p| *p += shift);
        }
        let v = vec![-normal * self.speed; x.len()];
        (x, v)
    }
}

/// Network plus optional wall, as an ODE right-hand side.
pub struct NetworkSystem<'a> {
    pub network: &'a Network,
    pub contact: Option<ContactModel>,
}

impl SecondOrderSystem for NetworkSystem<'_> {
    fn dim(&self) -> usize {
        3 * self.network.node_count()
    }

    fn acceleration(&self, _t: f64, x: &[f64], v: &[f64], a: &mut [f64]) -> bool {
        a.iter_mut().for_each(|q| *q = 0.0);
        if let Some(c) = &self.contact {
            let n = c.wall_normal;
            for (node, xi) in x.chunks_exact(3).enumerate() {
                let p = c.wall_offset - (n.x * xi[0] + n.y * xi[1] + n.z * xi[2]);
                if p > 0.0 {
                    let f = c.stiffness * p;
                    a[3 * node] += f * n.x;
                    a[3 * node + 1] += f * n.y;
                    a[3 * node + 2] += f * n.z;
                }
            }
        }
        if self.network.internal_forces(x, v, a, None).is_err() {
            return false;
        }
        for (node, w) in self.network.inv_mass().iter().enumerate() {
            a[3 * node] *= w;
            a[3 * node + 1] *= w;
            a[3 * node + 2] *= w;
        }
        true
    }
}

/// One output sample: flattened world positions and velocities.
pub struct StateView<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub v: &'a [f64],
}

impl StateView<'_> {
    pub fn position(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.x[3 * i], self.x[3 * i + 1], self.x[3 * i + 2])
    }

    pub fn velocity(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.v[3 * i], self.v[3 * i + 1], self.v[3 * i + 2])
    }
}

/// Integrates the network from the given state, calling `observer` at every
/// multiple of `settings.output_interval` (including t = 0).
pub fn simulate<F>(
    network: &Network,
    contact: Option<ContactModel>,
    x0: &[Vector3<f64>],
    v0: &[Vector3<f64>],
    duration: f64,
    settings: &SimSettings,
    mut observer: F,
) -> Result<SolverStats>
where
    F: FnMut(&StateView<'_>) -> StepControl,
{
    let sys = NetworkSystem { network, contact };
    let m = sys.dim();
    if x0.len() * 3 != m || v0.len() * 3 != m {
        return Err(Error::InvalidInput("initial state does not match the model".into()));
    }
    let mut y0 = flatten(x0);
    y0.extend(flatten(v0));
    if observer(&StateView { t: 0.0, x: &y0[..m], v: &y0[m..] }) == StepControl::Stop {
        return Ok(SolverStats::default());
    }
    let dt = settings.output_interval;
    let mut k = 1usize;
    let mut buf = vec![0.0; 2 * m];
    let sol = integrate(&sys, 0.0, &y0, duration, &settings.radau(), |dense| {
        loop {
            let ts = k as f64 * dt;
            if ts > dense.t_end() * (1.0 + 1e-12) || ts > duration * (1.0 + 1e-12) {
                return StepControl::Continue;
            }
            dense.eval(ts, &mut buf);
            k += 1;
            if observer(&StateView { t: ts, x: &buf[..m], v: &buf[m..] }) == StepControl::Stop {
                return StepControl::Stop;
            }
        }
    })?;
    Ok(sol.stats)
}

/// Tracks the separation condition: no penetration and every node moving
/// away from the wall, sustained for a time window.
#[derive(Clone, Debug)]
pub struct SeparationMonitor {
    contact: ContactModel,
    window: f64,
    since: Option<f64>,
    touched: bool,
}

impl SeparationMonitor {
    pub fn new(contact: ContactModel, window: f64) -> Self {
        Self { contact, window, since: None, touched: false }
    }

    /// Returns the separation time once the condition has held for the
    /// window.
    pub fn update(&mut self, s: &StateView<'_>) -> Option<f64> {
        let n = s.x.len() / 3;
        let mut penetrating = false;
        let mut receding = true;
        for i in 0..n {
            if self.contact.penetration(&s.position(i)) > 0.0 {
                penetrating = true;
            }
            if self.contact.wall_normal.dot(&s.velocity(i)) <= 0.0 {
                receding = false;
            }
        }
        self.touched |= penetrating;
        if self.touched && !penetrating && receding {
            let since = *self.since.get_or_insert(s.t);
            (s.t - since >= self.window).then_some(since)
        } else {
            self.since = None;
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Separated,
    Duration,
    Observer,
}

/// Runs a collision, streaming samples to `observer`; returns solver
/// statistics, the detected separation time and why the run ended.
pub fn run_collision_with<F>(
    scenario: &CollisionScenario,
    mut observer: F,
) -> Result<(SolverStats, Option<f64>, EndReason)>
where
    F: FnMut(&StateView<'_>) -> StepControl,
{
    scenario.validate()?;
    let network = Network::new(&scenario.model)?;
    let (x0, v0) = scenario.initial_state();
    let mut monitor = scenario
        .contact
        .map(|c| SeparationMonitor::new(c, scenario.settings.separation_window));
    let mut separation = None;
    let mut reason = EndReason::Duration;
    let stats = simulate(
        &network,
        scenario.contact,
        &x0,
        &v0,
        scenario.duration,
        &scenario.settings,
        |s| {
            if observer(s) == StepControl::Stop {
                reason = EndReason::Observer;
                return StepControl::Stop;
            }
            if let Some(mon) = monitor.as_mut() {
                if let Some(t) = mon.update(s) {
                    separation.get_or_insert(t);
                    if scenario.settings.stop_on_separation {
                        reason = EndReason::Separated;
                        return StepControl::Stop;
                    }
                }
            }
            StepControl::Continue
        },
    )?;
    Ok((stats, separation, reason))
}

/// Node state history of one collision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    /// s
    pub times: Vec<f64>,
    /// World-frame node positions per sample, m.
    pub positions: Vec<Vec<Vector3<f64>>>,
    /// m/s
    pub velocities: Vec<Vec<Vector3<f64>>>,
    pub stats: SolverStats,
    /// Start of the sustained separation window, s.
    pub separation_time: Option<f64>,
    pub end_reason: EndReason,
}

impl SimTrace {
    pub fn node_count(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn run_collision(scenario: &CollisionScenario) -> Result<SimTrace> {
    let mut times = Vec::new();
    let mut positions = Vec::new();
    let mut velocities = Vec::new();
    let (stats, separation_time, end_reason) = run_collision_with(scenario, |s| {
        times.push(s.t);
        positions.push(unflatten(s.x));
        velocities.push(unflatten(s.v));
        StepControl::Continue
    })?;
    Ok(SimTrace { times, positions, velocities, stats, separation_time, end_reason })
}

/// Kinetic plus elastic (members, joints, wall) energy, J.
pub fn mechanical_energy(
    model: &StructureModel,
    contact: Option<&ContactModel>,
    positions: &[Vector3<f64>],
    velocities: &[Vector3<f64>],
) -> Result<f64> {
    let net = Network::new(model)?;
    let kinetic: f64 = model
        .nodes
        .iter()
        .zip(velocities)
        .map(|(n, v)| 0.5 * n.mass * v.norm_squared())
        .sum();
    let wall: f64 = contact.map_or(0.0, |c| {
        positions
            .iter()
            .map(|x| 0.5 * c.stiffness * c.penetration(x).powi(2))
            .sum()
    });
    Ok(kinetic + net.elastic_energy(&flatten(positions)) + wall)
}

/// Columnar CSV: one row per (sample, node).
pub fn write_trace_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "node", "x_m", "y_m", "z_m", "vx_m_per_s", "vy_m_per_s", "vz_m_per_s"])?;
    for (k, &t) in trace.times.iter().enumerate() {
        for (i, (p, v)) in trace.positions[k].iter().zip(&trace.velocities[k]).enumerate() {
            w.write_record(&[
                format!("{t:.9e}"),
                i.to_string(),
                format!("{:.12e}", p.x),
                format!("{:.12e}", p.y),
                format!("{:.12e}", p.z),
                format!("{:.12e}", v.x),
                format!("{:.12e}", v.y),
                format!("{:.12e}", v.z),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Compact JSON-ready description of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub samples: usize,
    pub nodes: usize,
    pub end_time_s: f64,
    pub separation_time_s: Option<f64>,
    pub end_reason: EndReason,
    pub solver: SolverStats,
}

impl From<&SimTrace> for TraceSummary {
    fn from(t: &SimTrace) -> Self {
        Self {
            samples: t.len(),
            nodes: t.node_count(),
            end_time_s: t.times.last().copied().unwrap_or(0.0),
            separation_time_s: t.separation_time,
            end_reason: t.end_reason,
            solver: t.stats,
        }
    }
}
