//! Plant and experiment configuration files: plain key-value text with
//! one `[unit]` section per furnace.

use crate::plant::{FurnaceParams, ModelVariant, PlantConfig};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{scope}: missing field '{field}'")]
    MissingField { scope: String, field: &'static str },
    #[error("{scope}: bad value for '{field}': {value}")]
    BadValue {
        scope: String,
        field: String,
        value: String,
    },
    #[error("unknown builtin plant '{0}' (expected homogeneous3 or heterogeneous3)")]
    UnknownBuiltin(String),
}

/// Sectioned key-value text: top-level pairs plus repeated named sections.
#[derive(Debug, Default, Clone)]
pub struct KvFile {
    pub top: BTreeMap<String, String>,
    pub sections: Vec<(String, BTreeMap<String, String>)>,
}

pub fn parse_kv(text: &str) -> Result<KvFile, ConfigError> {
    let mut out = KvFile::default();
    let mut current: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            out.sections.push((name.trim().to_string(), BTreeMap::new()));
            current = Some(out.sections.len() - 1);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
            line: lineno + 1,
            msg: "expected 'key = value' or '[section]'".into(),
        })?;
        let map = match current {
            Some(idx) => &mut out.sections[idx].1,
            None => &mut out.top,
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    scope: &str,
    field: &'static str,
) -> Result<T, ConfigError> {
    let raw = map.get(field).ok_or(ConfigError::MissingField {
        scope: scope.to_string(),
        field,
    })?;
    raw.parse().map_err(|_| ConfigError::BadValue {
        scope: scope.to_string(),
        field: field.to_string(),
        value: raw.clone(),
    })
}

/// Parse a plant configuration from key-value text.
pub fn parse_plant(text: &str) -> Result<PlantConfig, ConfigError> {
    let kv = parse_kv(text)?;
    let variant = match kv.top.get("variant").map(String::as_str) {
        None | Some("physical") => ModelVariant::Physical,
        Some("as_written") => ModelVariant::AsWritten,
        Some(other) => {
            return Err(ConfigError::BadValue {
                scope: "plant".into(),
                field: "variant".into(),
                value: other.to_string(),
            })
        }
    };
    let power_cap: f64 = parse_field(&kv.top, "plant", "power_cap")?;
    let feed_cap: Option<f64> = match kv.top.get("feed_cap") {
        Some(raw) => Some(raw.parse().map_err(|_| ConfigError::BadValue {
            scope: "plant".into(),
            field: "feed_cap".into(),
            value: raw.clone(),
        })?),
        None => None,
    };
    let mut units = Vec::new();
    for (i, (name, map)) in kv.sections.iter().enumerate() {
        if name != "unit" {
            continue;
        }
        let scope = format!("unit {i}");
        units.push(FurnaceParams {
            batch_size: parse_field(map, &scope, "batch_size")?,
            max_tap_rate: parse_field(map, &scope, "max_tap_rate")?,
            max_melt_rate: parse_field(map, &scope, "max_melt_rate")?,
            sell_price: parse_field(map, &scope, "sell_price")?,
            yield_frac: parse_field(map, &scope, "yield")?,
            proc_cost: parse_field(map, &scope, "proc_cost")?,
            startup_cost: parse_field(map, &scope, "startup_cost")?,
            melt_energy: parse_field(map, &scope, "melt_energy")?,
            base_energy: parse_field(map, &scope, "base_energy")?,
        });
    }
    if units.is_empty() {
        return Err(ConfigError::MissingField {
            scope: "plant".into(),
            field: "[unit]",
        });
    }
    Ok(PlantConfig {
        units,
        power_cap,
        feed_cap,
        variant,
    })
}

/// Resolve a plant reference: `builtin:homogeneous3`,
/// `builtin:heterogeneous3`, or a path to a plant file.
pub fn resolve_plant(reference: &str) -> Result<PlantConfig, ConfigError> {
    if let Some(name) = reference.strip_prefix("builtin:") {
        return match name {
            "homogeneous3" => Ok(crate::plant::presets::homogeneous_three()),
            "heterogeneous3" => Ok(crate::plant::presets::heterogeneous_three()),
            other => Err(ConfigError::UnknownBuiltin(other.to_string())),
        };
    }
    load_plant(Path::new(reference))
}

pub fn load_plant(path: &Path) -> Result<PlantConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_plant(&text)
}

/// Serialize a plant to the key-value format.
pub fn plant_to_text(plant: &PlantConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("variant = {}\n", plant.variant.as_str()));
    out.push_str(&format!("power_cap = {}\n", plant.power_cap));
    if let Some(fc) = plant.feed_cap {
        out.push_str(&format!("feed_cap = {fc}\n"));
    }
    for u in &plant.units {
        out.push_str("\n[unit]\n");
        out.push_str(&format!("batch_size = {}\n", u.batch_size));
        out.push_str(&format!("max_tap_rate = {}\n", u.max_tap_rate));
        out.push_str(&format!("max_melt_rate = {}\n", u.max_melt_rate));
        out.push_str(&format!("sell_price = {}\n", u.sell_price));
        out.push_str(&format!("yield = {}\n", u.yield_frac));
        out.push_str(&format!("proc_cost = {}\n", u.proc_cost));
        out.push_str(&format!("startup_cost = {}\n", u.startup_cost));
        out.push_str(&format!("melt_energy = {}\n", u.melt_energy));
        out.push_str(&format!("base_energy = {}\n", u.base_energy));
    }
    out
}

/// Where an experiment's prices come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceSource {
    /// Two CSV files on the 5-minute (or hourly day-ahead) grid.
    Files { dap: PathBuf, rtp: PathBuf },
    /// The built-in synthetic generator.
    Synthetic { seed: u64, days: usize },
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub prices: PriceSource,
    /// Chronological train fraction when the data is shorter than two
    /// years; two-year inputs split at the first year.
    pub train_fraction: f64,
    pub horizon: usize,
    pub step: usize,
    pub mip_gap: f64,
    pub node_limit: usize,
    /// None = one pass of 600 episodes per training day.
    pub episodes: Option<usize>,
    pub kappa: f64,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn synthetic_default() -> Self {
        Self {
            plant: crate::plant::presets::homogeneous_three(),
            prices: PriceSource::Synthetic { seed: 7, days: 120 },
            train_fraction: 0.5,
            horizon: 48,
            step: 12,
            mip_gap: 1e-3,
            node_limit: 60,
            episodes: None,
            kappa: 16.0,
            learning_rate: 0.1,
            discount: 0.99,
            epsilon_start: 1.0,
            epsilon_decay: 0.995,
            epsilon_min: 0.05,
            seed: 7,
        }
    }
}

/// Parse an experiment file; unspecified keys keep the synthetic defaults.
pub fn parse_experiment(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let kv = parse_kv(text)?;
    let mut cfg = ExperimentConfig::synthetic_default();
    let top = &kv.top;
    if let Some(reference) = top.get("plant") {
        cfg.plant = resolve_plant(reference)?;
    }
    let dap = top.get("dap").map(String::as_str).unwrap_or("synth");
    let rtp = top.get("rtp").map(String::as_str).unwrap_or("synth");
    let mut synth_seed = 7u64;
    let mut synth_days = 120usize;
    if let Some(raw) = top.get("synth_seed") {
        synth_seed = raw.parse().map_err(|_| ConfigError::BadValue {
            scope: "experiment".into(),
            field: "synth_seed".into(),
            value: raw.clone(),
        })?;
    }
    if let Some(raw) = top.get("synth_days") {
        synth_days = raw.parse().map_err(|_| ConfigError::BadValue {
            scope: "experiment".into(),
            field: "synth_days".into(),
            value: raw.clone(),
        })?;
    }
    cfg.prices = if dap == "synth" || rtp == "synth" {
        PriceSource::Synthetic {
            seed: synth_seed,
            days: synth_days,
        }
    } else {
        PriceSource::Files {
            dap: PathBuf::from(dap),
            rtp: PathBuf::from(rtp),
        }
    };

    macro_rules! opt_field {
        ($key:literal, $target:expr) => {
            if let Some(raw) = top.get($key) {
                $target = raw.parse().map_err(|_| ConfigError::BadValue {
                    scope: "experiment".into(),
                    field: $key.into(),
                    value: raw.clone(),
                })?;
            }
        };
    }
    opt_field!("train_fraction", cfg.train_fraction);
    opt_field!("horizon", cfg.horizon);
    opt_field!("step", cfg.step);
    opt_field!("mip_gap", cfg.mip_gap);
    opt_field!("node_limit", cfg.node_limit);
    opt_field!("kappa", cfg.kappa);
    opt_field!("eta", cfg.learning_rate);
    opt_field!("gamma", cfg.discount);
    opt_field!("epsilon_start", cfg.epsilon_start);
    opt_field!("epsilon_decay", cfg.epsilon_decay);
    opt_field!("epsilon_min", cfg.epsilon_min);
    opt_field!("seed", cfg.seed);
    if let Some(raw) = top.get("episodes") {
        cfg.episodes = if raw == "auto" {
            None
        } else {
            Some(raw.parse().map_err(|_| ConfigError::BadValue {
                scope: "experiment".into(),
                field: "episodes".into(),
                value: raw.clone(),
            })?)
        };
    }
    Ok(cfg)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_experiment(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::presets;

    #[test]
    fn plant_round_trip() {
        let plant = presets::heterogeneous_three();
        let text = plant_to_text(&plant);
        let parsed = parse_plant(&text).unwrap();
        assert_eq!(parsed, plant);
    }

    #[test]
    fn experiment_defaults_and_overrides() {
        let cfg = parse_experiment("").unwrap();
        assert_eq!(cfg.kappa, 16.0);
        assert!(matches!(cfg.prices, PriceSource::Synthetic { seed: 7, days: 120 }));

        let cfg = parse_experiment(
            "plant = builtin:heterogeneous3\nkappa = 13\nepisodes = 250\nsynth_days = 30\n",
        )
        .unwrap();
        assert_eq!(cfg.plant, presets::heterogeneous_three());
        assert_eq!(cfg.kappa, 13.0);
        assert_eq!(cfg.episodes, Some(250));
        assert!(matches!(cfg.prices, PriceSource::Synthetic { days: 30, .. }));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        match parse_plant("power_cap = 0.1\nnot a pair\n") {
            Err(ConfigError::Syntax { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
