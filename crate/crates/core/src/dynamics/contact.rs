use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frictionless penalty wall occupying `wall_normal · x < wall_offset`.
/// The normal points out of the wall, into free space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactModel {
    pub wall_normal: Vector3<f64>,
    /// m
    pub wall_offset: f64,
    /// k_o, N/m
    pub stiffness: f64,
}

impl ContactModel {
    pub fn new(wall_normal: Vector3<f64>, wall_offset: f64, stiffness: f64) -> Result<Self> {
        let c = Self { wall_normal, wall_offset, stiffness };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness > 0.0 && self.stiffness.is_finite()) {
            return Err(Error::InvalidConfig("wall stiffness must be positive".into()));
        }
        if (self.wall_normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("wall normal must be a unit vector".into()));
        }
        Ok(())
    }

    /// Penetration depth p ≥ 0 of a point.
    #[inline]
    pub fn penetration(&self, x: &Vector3<f64>) -> f64 {
        (self.wall_offset - self.wall_normal.dot(x)).max(0.0)
    }

    #[inline]
    pub fn force(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.wall_normal * (self.stiffness * self.penetration(x))
    }
}

/// Wall reaction u_i = k_o p_i n on every node.
pub fn contact_forces(contact: &ContactModel, positions: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    positions.iter().map(|x| contact.force(x)).collect()
}
