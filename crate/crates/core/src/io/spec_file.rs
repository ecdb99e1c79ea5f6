use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::spec::{CompiledModel, ModelSpec};
use crate::sampler::config::SamplerConfig;

/// A complete run description: model layout, priors and sampler settings.
///
/// ```toml
/// asc_reference = "bus"
/// cost_attribute = "cost"
///
/// [[alternatives]]
/// id = "car"
/// [[alternatives]]
/// id = "bus"
///
/// [[utility_terms]]
/// variable = "cost"
/// applies_to = ["car", "bus"]
///
/// [sampler]
/// n_sweeps = 2000
/// burn_in = 1000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpecFile {
    #[serde(flatten)]
    pub model: ModelSpec,
    #[serde(default)]
    pub sampler: SamplerConfig<f64>,
}

impl ModelSpecFile {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Parses and validates; every cross-reference is resolved before return.
    pub fn load(path: &Path) -> Result<(Self, CompiledModel)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file = Self::from_toml(&text).map_err(|m| Error::parse(path, m))?;
        let model = file.model.compile()?;
        file.sampler.validate()?;
        Ok((file, model))
    }
}
