//! Flat key=value config files and flag/config/default resolution.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use owsm_kit::decoder::ModelConfig;

/// Parsed `key = value` config file. Lines starting with `#` and blank
/// lines are ignored.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: HashMap<String, String>,
    path: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key = value", path.display(), i + 1);
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile {
            values,
            path: Some(path.to_path_buf()),
        })
    }

    /// Flag beats config beats default.
    pub fn resolve<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(value) = flag {
            return Ok(value);
        }
        match self.values.get(key) {
            Some(raw) => raw.parse().map_err(|e| {
                anyhow::anyhow!(
                    "{}: key {key} = {raw:?}: {e}",
                    self.path.as_deref().map(Path::display).map(|d| d.to_string()).unwrap_or_default()
                )
            }),
            None => Ok(default),
        }
    }

    pub fn resolve_opt<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key {key} = {raw:?}: {e}")),
            None => Ok(None),
        }
    }
}

/// Default seed: `OWSM_KIT_SEED` when set, else 0.
pub fn default_seed() -> u64 {
    std::env::var("OWSM_KIT_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

// Range checks shared by the commands; run before any file is written.

pub fn check_ctc_weight(value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) {
        bail!("ctc weight {value} is outside [0, 1]");
    }
    Ok(value)
}

pub fn check_beam_size(value: usize) -> Result<usize> {
    if value < 1 {
        bail!("beam size must be at least 1");
    }
    Ok(value)
}

pub fn check_fraction(value: f64) -> Result<f64> {
    if !(value > 0.0 && value <= 1.0) {
        bail!("fraction {value} is outside (0, 1]");
    }
    Ok(value)
}

pub fn check_time_reduction(value: usize) -> Result<usize> {
    if value < 1 {
        bail!("time reduction factor must be at least 1");
    }
    Ok(value)
}

pub fn check_model_preset(name: &str) -> Result<ModelConfig> {
    ModelConfig::preset(name).ok_or_else(|| {
        anyhow::anyhow!(
            "unknown model preset {name:?}; expected one of {:?}",
            ModelConfig::preset_names()
        )
    })
}

/// Warn (stderr) when the shard count leaves the recommended range.
pub fn warn_shard_range(n_shards: usize) {
    let range = owsm_kit::data_prep::SHARD_RANGE;
    if !range.contains(&n_shards) {
        eprintln!(
            "warning: {n_shards} shards is outside the recommended {}..={} range",
            range.start(),
            range.end()
        );
    }
}
