//! Layered configuration: built-in defaults, then each `--config` file in
//! order, then command-line flags. Files may set any subset of keys but
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use dmp_avoid_core::mlp::TrainConfig;
use dmp_avoid_core::pi2::DEMO_LENGTH;
use dmp_avoid_core::planner::bench::BenchConfig;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{AtPath, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pi2Section {
    pub rollouts: usize,
    pub gamma: f64,
    pub max_iters: usize,
    pub demo_length: f64,
}

impl Default for Pi2Section {
    fn default() -> Self {
        Pi2Section { rollouts: 16, gamma: 10.0, max_iters: 2000, demo_length: DEMO_LENGTH }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSection {
    pub samples: usize,
    pub seed: u64,
    /// Offset under test, fraction of L.
    pub offset: f64,
    /// Calibration grid step and upper limit.
    pub step: f64,
    pub max_offset: f64,
    pub histogram_bins: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { samples: 1000, seed: 0, offset: 0.02, step: 0.01, max_offset: 0.04, histogram_bins: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub pi2: Pi2Section,
    pub train: TrainConfig,
    pub eval: EvalSection,
    /// Scene, perception, RRT and end-effector settings shared by
    /// `detect`, `plan` and `bench`.
    pub bench: BenchConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config { pi2: Pi2Section::default(), train: TrainConfig::default(), eval: EvalSection::default(), bench: BenchConfig::default() }
    }
}

/// Overlays `patch` onto `base`, refusing keys `base` does not have.
fn merge(base: &mut Value, patch: Value, at: &str) -> Result<()> {
    match (base, patch) {
        (Value::Table(b), Value::Table(p)) => {
            for (k, v) in p {
                let key = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &key)?,
                    None => return Err(CliError::config(format!("unknown key `{key}`"))),
                }
            }
            Ok(())
        }
        (Value::Float(b), Value::Integer(i)) => {
            *b = i as f64;
            Ok(())
        }
        (b, p) if std::mem::discriminant(b) == std::mem::discriminant(&p) => {
            *b = p;
            Ok(())
        }
        (b, p) => Err(CliError::config(format!("`{at}` expects {}, found {}", b.type_str(), p.type_str()))),
    }
}

impl Config {
    pub fn layered(files: &[PathBuf]) -> Result<Self> {
        let mut value = Value::try_from(Config::default()).map_err(CliError::config)?;
        for path in files {
            let text = std::fs::read_to_string(path).at(path)?;
            let patch: Value = toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            merge(&mut value, patch, "").map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))?;
        }
        value.try_into().map_err(CliError::config)
    }

    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is plain data")
    }
}

pub fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse::<f64>().map_err(|e| format!("`{p}`: {e}"))?;
        if !o.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(out)
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).at(dir),
        _ => Ok(()),
    }
}
