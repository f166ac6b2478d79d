use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::StructureModel;
use crate::error::{Error, Result};

/// Point-mass inertia tensor about `about`.
pub fn compute_inertia(model: &StructureModel, about: &Vector3<f64>) -> Matrix3<f64> {
    model.nodes.iter().fold(Matrix3::zeros(), |acc, n| {
        let r = n.position - about;
        acc + n.mass * (Matrix3::identity() * r.norm_squared() - r * r.transpose())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceStability {
    Stable,
    Unstable,
}

/// A face is stable when the COM, projected along the face normal,
/// lands strictly inside the triangle.
pub fn face_stability(model: &StructureModel) -> Result<Vec<FaceStability>> {
    let com = model.center_of_mass();
    model
        .faces
        .iter()
        .enumerate()
        .map(|(idx, f)| {
            let [a, b, c] = f.nodes.map(|i| model.nodes[i].position);
            let n = (b - a).cross(&(c - a));
            let area2 = n.norm_squared();
            let scale = (b - a).norm_squared().max((c - a).norm_squared());
            if area2 <= 1e-24 * scale * scale {
                return Err(Error::InvalidGeometry(format!("face {idx} has zero area")));
            }
            let p = com - n * (n.dot(&(com - a)) / area2);
            // Barycentric signs relative to the triangle orientation.
            let inside = [(a, b), (b, c), (c, a)]
                .iter()
                .all(|(u, v)| (v - u).cross(&(p - u)).dot(&n) > 1e-12 * area2);
            Ok(if inside { FaceStability::Stable } else { FaceStability::Unstable })
        })
        .collect()
}
