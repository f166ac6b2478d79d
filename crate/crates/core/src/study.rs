//! Random-orientation wall-collision comparison and the scale study.

use std::io::Write;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_collision_with, CollisionScenario, ContactModel, SimSettings};
use crate::error::{Error, Result};
use crate::geometry::{build_icosahedron, build_propeller_guard, GuardConfig, IcosahedronConfig, StructureModel};
use crate::ode::StepControl;
use crate::stress::{StressMonitor, StressPeaks};

/// Fraction of failed samples above which a study is aborted.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

/// Uniform direction on the unit sphere restricted to the non-negative octant.
pub fn sample_octant_direction<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let g: Vector3<f64> = Vector3::from_fn(|_, _| rng.sample(StandardNormal));
        let n = g.norm();
        if n > 1e-12 {
            return g.abs() / n;
        }
    }
}

/// Minimal-angle rotation taking body direction `u` onto `-wall_normal`.
pub fn orientation_from_direction(u: &Vector3<f64>, wall_normal: &Vector3<f64>) -> Rotation3<f64> {
    let u = u.normalize();
    let target = -wall_normal.normalize();
    let cross = u.cross(&target);
    let (s, c) = (cross.norm(), u.dot(&target));
    if s < 1e-15 {
        if c > 0.0 {
            return Rotation3::identity();
        }
        // Antiparallel: half turn about the axis perpendicular to u built
        // from the coordinate axis least aligned with it.
        let k = u.iamin();
        let axis = u.cross(&Vector3::ith(k, 1.0));
        return Rotation3::from_axis_angle(&Unit::new_normalize(axis), std::f64::consts::PI);
    }
    Rotation3::from_axis_angle(&Unit::new_normalize(cross), s.atan2(c))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub samples: usize,
    pub seed: u64,
    /// m/s
    pub speed: f64,
    /// k_o, N/m
    pub wall_stiffness: f64,
    /// s
    pub duration: f64,
    #[serde(default)]
    pub settings: SimSettings,
    pub tensegrity: IcosahedronConfig,
    pub guard: GuardConfig,
    /// λ values for the scale study.
    #[serde(default)]
    pub scale_factors: Vec<f64>,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl StudyConfig {
    /// Reference vehicles at 5 m/s against the reference wall.
    pub fn reference(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            speed: crate::params::SPEED,
            wall_stiffness: crate::params::WALL_STIFFNESS,
            duration: crate::params::COLLISION_DURATION,
            settings: SimSettings::default(),
            tensegrity: crate::params::icosahedron_config(),
            guard: crate::params::guard_config(),
            scale_factors: vec![0.5, 1.0, 2.0, 4.0],
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        if !(self.speed > 0.0 && self.wall_stiffness > 0.0 && self.duration > 0.0) {
            return Err(Error::InvalidConfig("speed, wall stiffness and duration must be positive".into()));
        }
        if self.scale_factors.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig("scale factors must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        self.tensegrity.validate()?;
        self.guard.validate()
    }

    /// Lengths ×λ, masses and forces ×λ³; materials, ratios, speed and wall
    /// stiffness unchanged.
    pub fn scaled(&self, lambda: f64) -> Self {
        let l3 = lambda.powi(3);
        let mut c = self.clone();
        let t = &mut c.tensegrity;
        t.rod_length *= lambda;
        t.pretension *= l3;
        t.mass.structure_mass *= l3;
        t.mass.quad_mass *= l3;
        t.rod_section = t.rod_section.scaled(lambda);
        let g = &mut c.guard;
        g.prop_diameter *= lambda;
        g.arm_radius = g.arm_radius.map(|r| r * lambda);
        g.clearance *= lambda;
        g.mass.structure_mass *= l3;
        g.mass.quad_mass *= l3;
        g.rod_section = g.rod_section.scaled(lambda);
        c
    }

    /// Sampled body-frame directions, in sample order.
    pub fn directions(&self) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.samples).map(|_| sample_octant_direction(&mut rng)).collect()
    }
}

/// Peak stresses of one vehicle in one collision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionPeaks {
    pub peaks: StressPeaks,
    /// Pa
    pub max_stress: f64,
    pub separation_time: Option<f64>,
    pub exposure_distance: Option<f64>,
}

/// Runs one wall collision of `model` with body direction `u` facing the
/// wall and returns the stress peaks.
pub fn collision_peaks(
    model: &StructureModel,
    u: &Vector3<f64>,
    speed: f64,
    wall_stiffness: f64,
    duration: f64,
    settings: &SimSettings,
) -> Result<CollisionPeaks> {
    let normal = Vector3::x();
    let scenario = CollisionScenario {
        model: model.clone(),
        orientation: orientation_from_direction(u, &normal),
        speed,
        contact: Some(ContactModel::new(normal, 0.0, wall_stiffness)?),
        duration,
        settings: *settings,
    };
    let mut monitor = StressMonitor::new(model)?;
    let mut err = None;
    let (_, separation_time, _) = run_collision_with(&scenario, |s| match monitor.observe(s) {
        Ok(()) => StepControl::Continue,
        Err(e) => {
            err = Some(e);
            StepControl::Stop
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(CollisionPeaks {
        peaks: monitor.peaks,
        max_stress: monitor.peaks.max_stress(),
        separation_time,
        exposure_distance: monitor.exposure_distance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub index: usize,
    /// Body-frame unit direction facing the wall.
    pub direction: Vector3<f64>,
    pub tensegrity: Option<CollisionPeaks>,
    pub guard: Option<CollisionPeaks>,
    /// Guard over tensegrity maximum stress.
    pub ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles of a non-empty sample.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            if v.is_empty() {
                return f64::NAN;
            }
            let h = p * (v.len() - 1) as f64;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Self { p05: q(0.05), p25: q(0.25), p50: q(0.5), p75: q(0.75), p95: q(0.95) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyAggregates {
    pub valid: usize,
    pub failed: usize,
    /// Pa
    pub mean_tensegrity: f64,
    /// Pa
    pub mean_guard: f64,
    pub mean_ratio: f64,
    pub tensegrity_quantiles: Quantiles,
    pub guard_quantiles: Quantiles,
    pub ratio_quantiles: Quantiles,
    pub fraction_ratio_ge_2: f64,
    /// Samples where the guard sees the lower maximum stress.
    pub fraction_ratio_lt_1: f64,
    /// Sample with the largest tensegrity maximum stress.
    pub worst_tensegrity_sample: Option<usize>,
}

impl StudyAggregates {
    pub fn from_samples(samples: &[SampleResult]) -> Self {
        let ok: Vec<_> = samples
            .iter()
            .filter_map(|s| Some((s.index, s.tensegrity?.max_stress, s.guard?.max_stress, s.ratio?)))
            .collect();
        let n = ok.len();
        let mean = |f: &dyn Fn(&(usize, f64, f64, f64)) -> f64| {
            if n == 0 { f64::NAN } else { ok.iter().map(f).sum::<f64>() / n as f64 }
        };
        let frac = |f: &dyn Fn(f64) -> bool| {
            if n == 0 { f64::NAN } else { ok.iter().filter(|s| f(s.3)).count() as f64 / n as f64 }
        };
        let col = |f: &dyn Fn(&(usize, f64, f64, f64)) -> f64| ok.iter().map(f).collect::<Vec<_>>();
        Self {
            valid: n,
            failed: samples.len() - n,
            mean_tensegrity: mean(&|s| s.1),
            mean_guard: mean(&|s| s.2),
            mean_ratio: mean(&|s| s.3),
            tensegrity_quantiles: Quantiles::of(&col(&|s| s.1)),
            guard_quantiles: Quantiles::of(&col(&|s| s.2)),
            ratio_quantiles: Quantiles::of(&col(&|s| s.3)),
            fraction_ratio_ge_2: frac(&|r| r >= 2.0),
            fraction_ratio_lt_1: frac(&|r| r < 1.0),
            worst_tensegrity_sample: ok.iter().max_by(|a, b| a.1.total_cmp(&b.1)).map(|s| s.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub seed: u64,
    pub samples: Vec<SampleResult>,
    pub aggregates: StudyAggregates,
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Collides both vehicles at every sampled orientation.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let tensegrity = build_icosahedron(&config.tensegrity)?;
    let guard = build_propeller_guard(&config.guard)?;
    run_study_models(config, &tensegrity, &guard)
}

/// As [`run_study`] with prebuilt vehicle models.
pub fn run_study_models(config: &StudyConfig, tensegrity: &StructureModel, guard: &StructureModel) -> Result<StudyResult> {
    config.validate()?;
    let dirs = config.directions();
    let run = |model: &StructureModel, u: &Vector3<f64>| {
        collision_peaks(model, u, config.speed, config.wall_stiffness, config.duration, &config.settings)
    };
    let samples: Vec<SampleResult> = in_pool(config.workers, || {
        dirs.par_iter()
            .enumerate()
            .map(|(index, u)| {
                let t = run(tensegrity, u);
                let g = run(guard, u);
                let error = match (&t, &g) {
                    (Err(e), _) | (_, Err(e)) => {
                        log::warn!("sample {index} failed: {e}");
                        Some(e.to_string())
                    }
                    _ => None,
                };
                let (t, g) = (t.ok(), g.ok());
                let ratio = match (t, g) {
                    (Some(t), Some(g)) if t.max_stress > 0.0 => Some(g.max_stress / t.max_stress),
                    _ => None,
                };
                log::debug!("sample {index}: ratio {ratio:?}");
                SampleResult { index, direction: *u, tensegrity: t, guard: g, ratio, error }
            })
            .collect()
    })?;
    let aggregates = StudyAggregates::from_samples(&samples);
    if aggregates.failed as f64 > MAX_FAILURE_FRACTION * samples.len() as f64 {
        return Err(Error::StudyAborted { failed: aggregates.failed, total: samples.len() });
    }
    if aggregates.failed > 0 {
        log::warn!("{} of {} samples excluded", aggregates.failed, samples.len());
    }
    Ok(StudyResult { seed: config.seed, samples, aggregates })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub lambda: f64,
    pub mean_ratio: f64,
    pub aggregates: StudyAggregates,
}

/// Reruns the study at every scale factor with the same seed.
pub fn scale_study(config: &StudyConfig, lambdas: &[f64]) -> Result<Vec<ScalePoint>> {
    lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidConfig(format!("scale factor {lambda} must be positive")));
            }
            let r = run_study(&config.scaled(lambda))?;
            log::info!("scale {lambda}: mean ratio {:.4}", r.aggregates.mean_ratio);
            Ok(ScalePoint { lambda, mean_ratio: r.aggregates.mean_ratio, aggregates: r.aggregates })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One row per sample.
pub fn write_study_csv<W: Write>(result: &StudyResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sample",
        "dir_x",
        "dir_y",
        "dir_z",
        "tensegrity_max_stress_pa",
        "guard_max_stress_pa",
        "ratio",
        "tensegrity_separation_s",
        "guard_separation_s",
        "error",
    ])?;
    for s in &result.samples {
        w.write_record([
            s.index.to_string(),
            s.direction.x.to_string(),
            s.direction.y.to_string(),
            s.direction.z.to_string(),
            opt(s.tensegrity.map(|p| p.max_stress)),
            opt(s.guard.map(|p| p.max_stress)),
            opt(s.ratio),
            opt(s.tensegrity.and_then(|p| p.separation_time)),
            opt(s.guard.and_then(|p| p.separation_time)),
            s.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scale_csv<W: Write>(points: &[ScalePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "mean_ratio", "mean_tensegrity_pa", "mean_guard_pa", "valid", "failed"])?;
    for p in points {
        w.write_record([
            p.lambda.to_string(),
            p.mean_ratio.to_string(),
            p.aggregates.mean_tensegrity.to_string(),
            p.aggregates.mean_guard.to_string(),
            p.aggregates.valid.to_string(),
            p.aggregates.failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn octant_samples_are_unit_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = sample_octant_direction(&mut rng);
            assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-14);
            assert!(u.iter().all(|c| *c >= 0.0));
        }
    }

    #[test]
    fn orientation_special_cases() {
        let n = Vector3::x();
        assert_eq!(orientation_from_direction(&-n, &n), Rotation3::identity());
        let r = orientation_from_direction(&n, &n);
        assert_relative_eq!(r.angle(), std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(r * n, -n, epsilon = 1e-12);
    }

    #[test]
    fn quantiles_interpolate() {
        let q = Quantiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_relative_eq!(q.p50, 3.0);
        assert_relative_eq!(q.p25, 2.0);
        assert_relative_eq!(q.p05, 1.2);
    }
}
