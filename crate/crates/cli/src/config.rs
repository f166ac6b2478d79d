//! Versioned JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tensegrity_core::dynamics::SimSettings;
use tensegrity_core::geometry::{GuardConfig, IcosahedronConfig};
use tensegrity_core::params;
use tensegrity_core::reorient::{ControllerGains, PivotConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config field `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("unsupported schema_version {found}, expected {SCHEMA_VERSION}")]
    Version { found: u32 },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `TENSEG_WORKERS` takes precedence.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub collision: CollisionBlock,
    #[serde(default)]
    pub limits: LimitsBlock,
    #[serde(default)]
    pub study: StudyBlock,
    #[serde(default)]
    pub vehicle: VehicleBlock,
    #[serde(default)]
    pub pivot: PivotBlock,
    #[serde(default)]
    pub thrust_map: ThrustMapBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            workers: None,
            collision: CollisionBlock::default(),
            limits: LimitsBlock::default(),
            study: StudyBlock::default(),
            vehicle: VehicleBlock::default(),
            pivot: PivotBlock::default(),
            thrust_map: ThrustMapBlock::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shell {
    Tensegrity,
    Guard,
}

/// A body-frame direction that faces the wall at impact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDirection {
    pub name: String,
    pub direction: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollisionBlock {
    pub shell: Shell,
    pub tensegrity: IcosahedronConfig,
    pub guard: GuardConfig,
    /// m/s
    pub speed: f64,
    /// N/m
    pub wall_stiffness: f64,
    /// s
    pub duration: f64,
    pub settings: SimSettings,
    /// Empty selects rod-perpendicular, node-first and string-face-first.
    pub orientations: Vec<NamedDirection>,
}

impl Default for CollisionBlock {
    fn default() -> Self {
        Self {
            shell: Shell::Tensegrity,
            tensegrity: params::icosahedron_config(),
            guard: params::guard_config(),
            speed: params::SPEED,
            wall_stiffness: params::WALL_STIFFNESS,
            duration: params::COLLISION_DURATION,
            settings: SimSettings::default(),
            orientations: Vec::new(),
        }
    }
}

/// Overrides for the design limits; unset values come from the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsBlock {
    pub string_safety: f64,
    pub rod_safety: f64,
    /// Pa
    pub string_yield: Option<f64>,
    /// Pa
    pub rod_yield: Option<f64>,
    /// m
    pub exposure_threshold: Option<f64>,
}

impl Default for LimitsBlock {
    fn default() -> Self {
        Self { string_safety: 1.5, rod_safety: 1.5, string_yield: None, rod_yield: None, exposure_threshold: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyBlock {
    pub samples: usize,
    /// Samples per scale factor in the scale study.
    pub scale_samples: usize,
    pub scale_factors: Vec<f64>,
    /// m/s
    pub speed: f64,
    /// N/m
    pub wall_stiffness: f64,
    /// s
    pub duration: f64,
    pub settings: SimSettings,
    pub tensegrity: IcosahedronConfig,
    pub guard: GuardConfig,
}

impl Default for StudyBlock {
    fn default() -> Self {
        Self {
            samples: 200,
            scale_samples: 100,
            scale_factors: vec![0.5, 1.0, 2.0, 4.0],
            speed: params::SPEED,
            wall_stiffness: params::WALL_STIFFNESS,
            duration: params::COLLISION_DURATION,
            settings: SimSettings::default(),
            tensegrity: params::icosahedron_config(),
            guard: params::guard_config(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleBlock {
    pub shell: IcosahedronConfig,
    /// N
    pub thrust_max: f64,
    /// N
    pub thrust_min: f64,
    /// m
    pub torque_coeff: f64,
    /// Shell-to-body rotation as a rotation vector, rad.
    pub mount_rotation: [f64; 3],
    pub friction: f64,
    pub friction_facets: usize,
    /// Empty selects the default goal faces.
    pub goal_faces: Vec<usize>,
}

impl Default for VehicleBlock {
    fn default() -> Self {
        Self {
            shell: params::experimental_config(),
            thrust_max: params::EXPERIMENT_THRUST_MAX,
            thrust_min: params::EXPERIMENT_THRUST_MIN,
            torque_coeff: params::EXPERIMENT_TORQUE_COEFF,
            mount_rotation: [0.0; 3],
            friction: 0.2,
            friction_facets: 16,
            goal_faces: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PivotBlock {
    /// Reference duration T, s.
    pub duration: f64,
    pub gains: ControllerGains,
    pub sim: PivotConfig,
    /// (from, to) face pairs; empty simulates every planned rotation.
    pub rotations: Vec<[usize; 2]>,
    /// Allowed final angle error, degrees.
    pub tolerance_deg: f64,
}

impl Default for PivotBlock {
    fn default() -> Self {
        Self {
            duration: 1.0,
            gains: ControllerGains::default(),
            sim: PivotConfig::default(),
            rotations: Vec::new(),
            tolerance_deg: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    /// N·m
    pub min: f64,
    /// N·m
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n).map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThrustMapBlock {
    /// Rotation to map; unset uses the first goal face and its first neighbour.
    pub rotation: Option<[usize; 2]>,
    pub axis1: GridAxis,
    pub axis2: GridAxis,
}

impl Default for ThrustMapBlock {
    fn default() -> Self {
        let axis = GridAxis { min: -0.4, max: 0.4, count: 41 };
        Self { rotation: None, axis1: axis, axis2: axis }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Field {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version { found: cfg.schema_version });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Canonical serialization used for hashing and re-execution.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
