use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StructureModel;
use crate::error::{Error, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// On-disk model with an explicit unit table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: u32,
    pub units: BTreeMap<String, String>,
    pub model: StructureModel,
}

impl ModelDocument {
    pub fn new(model: StructureModel) -> Self {
        let units = [
            ("position", "m"),
            ("mass", "kg"),
            ("rest_length", "m"),
            ("rest_angle", "rad"),
            ("area", "m^2"),
            ("second_moment", "m^4"),
            ("outer_radius", "m"),
            ("youngs_modulus", "Pa"),
            ("yield_strength", "Pa"),
            ("density", "kg/m^3"),
            ("member_stiffness", "N/m"),
            ("member_damping", "N*s/m"),
            ("joint_stiffness", "N*m/rad"),
            ("joint_damping", "N*m*s/rad"),
            ("pretension", "N"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Self { schema: MODEL_SCHEMA_VERSION, units, model }
    }
}

pub fn save_model(path: &Path, model: &StructureModel) -> Result<()> {
    let doc = ModelDocument::new(model.clone());
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<StructureModel> {
    let text = std::fs::read_to_string(path)?;
    let doc: ModelDocument = serde_json::from_str(&text)?;
    if doc.schema != MODEL_SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported model schema {} (expected {MODEL_SCHEMA_VERSION})",
            doc.schema
        )));
    }
    doc.model.validate()?;
    Ok(doc.model)
}
