//! Run configuration.
//!
//! Config files are flat JSON objects with dotted keys (`"train.beta": 1.0`).
//! Resolution order is defaults, then the file, then command-line flags. The
//! resolved map is what every artifact records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use re2llm_core::data::PrepareConfig;
use re2llm_core::encoder::EncoderSpec;
use re2llm_core::eval::EvalConfig;
use re2llm_core::kb::KbBuildConfig;
use re2llm_core::llm::{Domain, LlmProfile};
use re2llm_core::sim::WorldConfig;
use re2llm_core::TrainConfig;

/// Sub-seeds that follow the top-level `seed` unless set explicitly.
const SEED_KEYS: [&str; 5] = ["data.seed", "kb.seed", "train.seed", "sim.seed", "eval.sample_seed"];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Interaction log (JSONL of user/item/timestamp/rating records).
    pub interactions: Option<PathBuf>,
    /// Item catalog (JSONL of item_id/title/attributes).
    pub items: Option<PathBuf>,
    #[serde(flatten)]
    pub prepare: PrepareConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct KbSection {
    pub path: Option<PathBuf>,
    #[serde(flatten)]
    pub build: KbBuildConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSection {
    /// Simulated world backing the simulated backend.
    pub world: Option<PathBuf>,
    #[serde(flatten)]
    pub profile: LlmProfile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub few_shot: usize,
    pub policy: Option<PathBuf>,
    #[serde(flatten)]
    pub config: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { few_shot: 500, policy: None, config: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Artifact directory.
    pub out: PathBuf,
    pub domain: Domain,
    /// Prepared dataset artifact; defaults to `<out>/dataset.json`.
    pub dataset: Option<PathBuf>,
    pub data: DataSection,
    pub kb: KbSection,
    pub llm: LlmSection,
    pub encoder: EncoderSpec,
    pub train: TrainSection,
    pub eval: EvalConfig,
    pub sim: WorldConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("artifacts"),
            domain: Domain::default(),
            dataset: None,
            data: DataSection::default(),
            kb: KbSection::default(),
            llm: LlmSection::default(),
            encoder: EncoderSpec::default(),
            train: TrainSection::default(),
            eval: EvalConfig::default(),
            sim: WorldConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join("dataset.json"))
    }

    pub fn kb_path(&self) -> PathBuf {
        self.kb.path.clone().unwrap_or_else(|| self.out.join("kb.json"))
    }

    pub fn policy_path(&self) -> PathBuf {
        self.train.policy.clone().unwrap_or_else(|| self.out.join("policy.json"))
    }

    pub fn world_path(&self) -> PathBuf {
        self.llm.world.clone().unwrap_or_else(|| self.out.join("world.json"))
    }
}

/// A bad key or value in a config file or override. Reported as a usage error.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Fully resolved configuration plus its flat form for artifacts.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub flat: BTreeMap<String, Value>,
}

pub fn flatten(value: &Value) -> BTreeMap<String, Value> {
    fn walk(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
        match v {
            Value::Object(map) if !map.is_empty() => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            _ => {
                out.insert(prefix.to_string(), v.clone());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk("", value, &mut out);
    out
}

fn unflatten(flat: &BTreeMap<String, Value>) -> Value {
    let mut root = Map::new();
    for (key, v) in flat {
        let mut node = &mut root;
        let mut parts = key.split('.').peekable();
        while let Some(part) = parts.next() {
            if parts.peek().is_none() {
                node.insert(part.to_string(), v.clone());
            } else {
                node = node
                    .entry(part.to_string())
                    .or_insert_with(|| Value::Object(Map::new()))
                    .as_object_mut()
                    .expect("flat keys never nest under a leaf");
            }
        }
    }
    Value::Object(root)
}

/// Parse a `KEY=VALUE` override. Values are JSON when they parse as JSON and
/// plain strings otherwise.
pub fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (k, v) = raw
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{raw}` is not KEY=VALUE")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, Value)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| config_error(format!("config {}: {e}", path.display())))?;
    let Value::Object(map) = value else {
        return Err(config_error(format!("config {} must be a JSON object", path.display())));
    };
    Ok(map.into_iter().collect())
}

/// Apply `layers` in order over the defaults.
pub fn resolve(layers: &[(String, Value)]) -> Result<Resolved> {
    let defaults = serde_json::to_value(RunConfig::default())?;
    let mut flat = flatten(&defaults);
    let mut explicit = BTreeSet::new();
    for (key, value) in layers {
        if !flat.contains_key(key) {
            return Err(config_error(format!("unknown config key `{key}`")));
        }
        if value.is_object() {
            return Err(config_error(format!("config key `{key}` needs a scalar or list value")));
        }
        flat.insert(key.clone(), value.clone());
        explicit.insert(key.as_str());
    }
    let seed = flat["seed"].clone();
    for key in SEED_KEYS {
        if !explicit.contains(key) {
            flat.insert(key.to_string(), seed.clone());
        }
    }
    let config: RunConfig =
        serde_json::from_value(unflatten(&flat)).map_err(|e| config_error(format!("invalid config: {e}")))?;
    // Re-flatten so the record shows normalized values.
    let flat = flatten(&serde_json::to_value(&config)?);
    Ok(Resolved { config, flat })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(k: &str, v: Value) -> (String, Value) {
        (k.to_string(), v)
    }

    #[test]
    fn defaults_round_trip() {
        let r = resolve(&[]).unwrap();
        assert_eq!(r.config.train.few_shot, 500);
        assert_eq!(r.config.kb.build.capacity, 20);
        assert!(r.flat.contains_key("train.beta"));
        assert!(r.flat.contains_key("llm.retry.max_retries"));
    }

    #[test]
    fn later_layers_win_and_seed_propagates() {
        let r = resolve(&[kv("seed", 9.into()), kv("train.beta", 0.5.into()), kv("train.beta", 2.0.into())]).unwrap();
        assert_eq!(r.config.train.config.beta, 2.0);
        assert_eq!(r.config.train.config.seed, 9);
        assert_eq!(r.config.kb.build.seed, 9);
        assert_eq!(r.config.eval.sample_seed, 9);
    }

    #[test]
    fn explicit_sub_seed_is_kept() {
        let r = resolve(&[kv("seed", 9.into()), kv("kb.seed", 3.into())]).unwrap();
        assert_eq!(r.config.kb.build.seed, 3);
        assert_eq!(r.config.sim.seed, 9);
    }

    #[test]
    fn unknown_and_nested_keys_are_rejected() {
        let e = resolve(&[kv("train.betta", 1.into())]).unwrap_err();
        assert!(e.downcast_ref::<ConfigError>().is_some());
        assert!(resolve(&[kv("train.beta", serde_json::json!({"x": 1}))]).is_err());
        assert!(resolve(&[kv("train.beta", "high".into())]).is_err());
    }

    #[test]
    fn overrides_parse_json_or_string() {
        assert_eq!(parse_override("train.beta=0.5").unwrap(), kv("train.beta", 0.5.into()));
        assert_eq!(parse_override("out=runs/a").unwrap(), kv("out", "runs/a".into()));
        assert!(parse_override("nonsense").is_err());
    }
}
