//! JSON run documents. Command-line flags are applied on top of the parsed
//! document before it is turned into typed configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::synth::uniform_values;
use super::CliError;
use crate::field::{read_pgm, ScalarField};
use crate::potts::{ModelConfig, RegionForce};
use crate::splitting::SchemeSpec;

/// Input document of `export-net` and `eval-net`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default)]
    pub seed: u64,
    pub u0: InitialField,
    pub scheme: SchemeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialField {
    /// Uniform values in `[lo, hi)` drawn from the document seed.
    Random {
        width: usize,
        height: usize,
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    Field {
        field: ScalarField,
    },
}

fn one() -> f64 {
    1.0
}

impl SchemeConfig {
    pub fn initial_field(&self) -> crate::Result<ScalarField> {
        match &self.u0 {
            InitialField::Random {
                width,
                height,
                lo,
                hi,
            } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(crate::error::invalid("random u0 needs finite lo <= hi"));
                }
                ScalarField::new(
                    *width,
                    *height,
                    uniform_values(width * height, self.seed, *lo, *hi),
                )
            }
            InitialField::Field { field } => Ok(field.clone()),
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn read_field(path: &Path) -> Result<ScalarField, CliError> {
    let bytes = read_file(path)?;
    read_pgm(&bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn parse_scheme_config(value: Value) -> Result<SchemeConfig, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::config(format!("scheme config: {e}")))
}

/// Mutable view of a JSON object, for flag overrides.
pub fn as_object(value: &mut Value) -> Result<&mut Map<String, Value>, CliError> {
    value
        .as_object_mut()
        .ok_or_else(|| CliError::config("configuration must be a JSON object"))
}

/// Splits a segment document into the model configuration and an optional
/// explicit region force. An `init` of kind `file` is loaded from its PGM
/// path, resolved against `base_dir`.
pub fn parse_segment_config(
    mut value: Value,
    base_dir: &Path,
) -> Result<(ModelConfig, Option<RegionForce>), CliError> {
    let obj = as_object(&mut value)?;
    let force = match obj.remove("force") {
        None | Some(Value::Null) => None,
        Some(v) => {
            Some(serde_json::from_value(v).map_err(|e| CliError::config(format!("force: {e}")))?)
        }
    };
    if let Some(init) = obj.get_mut("init") {
        if init.get("kind").and_then(Value::as_str) == Some("file") {
            let rel = init
                .get("path")
                .and_then(Value::as_str)
                .ok_or_else(|| CliError::config("init of kind file needs a path"))?;
            let field = read_field(&base_dir.join(rel))?;
            *init = serde_json::json!({ "kind": "field", "field": field });
        }
    }
    let model: ModelConfig = serde_json::from_value(value)
        .map_err(|e| CliError::config(format!("segment config: {e}")))?;
    model
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    Ok((model, force))
}
