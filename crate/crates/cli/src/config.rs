//! Layered configuration: defaults, then command-line flags, then `--config`.

use std::path::Path;

use holoweld::construct::PipelineConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Overlays the non-null keys of `top` onto `base`, recursing into objects.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                if v.is_null() {
                    continue;
                }
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// `msg at `path``, or just `msg` when the error has no position in the document tree.
pub fn located(msg: impl std::fmt::Display, path: &serde_path_to_error::Path) -> String {
    match path.to_string().as_str() {
        "." | "?" => msg.to_string(),
        p => format!("{msg} at `{p}`"),
    }
}

fn read_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Config(format!("{}: {}", path.display(), located(e.inner(), e.path()))))
}

/// `defaults <- flags <- file`, then a typed parse that names the failing path.
pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, flags: Value, file: Option<&Path>) -> Result<T, CliError> {
    let mut v = serde_json::to_value(defaults).map_err(|e| CliError::Internal(e.to_string()))?;
    merge(&mut v, flags);
    if let Some(p) = file {
        merge(&mut v, read_file(p)?);
    }
    serde_path_to_error::deserialize(v).map_err(|e| CliError::Config(located(e.inner(), e.path())))
}

/// Flag record as a JSON object with absent flags dropped.
pub fn flags<T: Serialize>(f: &T) -> Value {
    match serde_json::to_value(f) {
        Ok(Value::Object(m)) => Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect::<Map<_, _>>()),
        _ => Value::Object(Map::new()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsConfig {
    #[serde(rename = "C")]
    pub c: f64,
    /// `random:N` or `file:path.json` (a list of `[x, y]` pairs).
    pub points: String,
    /// Half edge of the square holding random points; `1 + 2 sqrt(N)` when absent.
    pub extent: Option<f64>,
    /// Grid spacing; `1/(8C)` when absent.
    pub h: Option<f64>,
    pub seed: u64,
    /// Pixels per side of the heatmap.
    pub image_size: usize,
}

impl Default for WindowsConfig {
    fn default() -> Self {
        Self { c: 8.0, points: "random:20".into(), extent: None, h: None, seed: 0, image_size: 1025 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlueKind {
    Subharmonic,
    Entire,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueConfig {
    pub kind: GlueKind,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub points: String,
    pub extent: Option<f64>,
    /// Grid spacing; `1/(32C)` when absent.
    pub h: Option<f64>,
    /// Degree of the random polynomial patches.
    pub patch_degree: usize,
    /// Degree of the welded polynomial.
    pub degree: usize,
    pub eps: f64,
    pub seed: u64,
    pub image_size: usize,
}

impl Default for GlueConfig {
    fn default() -> Self {
        Self {
            kind: GlueKind::Entire,
            c: 8.0,
            m: 400.0,
            b: 10.0,
            points: "random:3".into(),
            extent: None,
            h: None,
            patch_degree: 3,
            degree: 24,
            eps: 0.01,
            seed: 0,
            image_size: 1025,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowersConfig {
    pub levels: usize,
    #[serde(rename = "D")]
    pub d: f64,
    pub eps: f64,
    pub seed: u64,
    /// Random placements for the four-corner check.
    pub corners: usize,
}

impl Default for TowersConfig {
    fn default() -> Self {
        Self { levels: 3, d: 100.0, eps: 0.01, seed: 0, corners: 1000 }
    }
}

/// Pipeline configuration; the desk layout is off unless requested.
pub fn construct_defaults() -> PipelineConfig {
    PipelineConfig { desk: None, ..PipelineConfig::default() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Linear,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerConfig {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub eps: f64,
    /// Largest `m`; accepts `1e9`.
    pub mmax: f64,
    pub grid: GridKind,
    pub per_decade: usize,
    pub seed: u64,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self { b: 20.0, d: 100.0, eps: 0.5, mmax: 1e6, grid: GridKind::Geometric, per_decade: 20, seed: 0 }
    }
}
