use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

/// Top level of an experiment file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol_scale: Option<f64>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

/// A config that does not match the schema, with the JSON path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for SchemaError {}

impl SchemaError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError { path: path.into(), message: message.into() }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| SchemaError::new(e.path().to_string(), e.inner().to_string()))?;
    if let Some(s) = cfg.tol_scale {
        if !(s.is_finite() && s > 0.0) {
            return Err(SchemaError::new("tol_scale", "must be a positive number"));
        }
    }
    Ok(cfg)
}

/// Deserialize the `params` object of an experiment, reporting paths below `params`.
pub fn params<T: DeserializeOwned>(value: &Value) -> Result<T, SchemaError> {
    serde_path_to_error::deserialize(value.clone()).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { "params".to_string() } else { format!("params.{inner}") };
        SchemaError::new(path, e.inner().to_string())
    })
}
