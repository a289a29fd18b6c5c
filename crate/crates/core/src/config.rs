//! Run configuration and its sectioned key/value (TOML) text form.
//!
//! Grammar: a TOML document with the top-level keys `profile`, `seed` and
//! `method`, and the sections `[schedule]`, `[data]`, `[data.synth]`,
//! `[model]`, `[loss]`, `[memory]`, `[train]`, `[eval]`. Every key is
//! optional; missing keys take the defaults of the selected profile.
//! Overrides are `key=value` strings whose key is either a dotted path
//! (`loss.alpha`) or a unique leaf name (`alpha`); the value is parsed as a
//! TOML value and falls back to a bare string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::data::{Scenario, SynthSpec};
use crate::error::{Error, Result};
use crate::losses::LossHyperParams;
use crate::numeric::Activation;
use crate::trainer::MethodVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Small synthetic benchmark sized for a laptop.
    #[default]
    Desk,
    /// Batch size, epochs and learning rate as used for full-scale training.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Synthetic,
    Csv,
}

/// Which training samples belong to a task's stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaskData {
    /// Samples with at least one positive among the task's classes.
    #[default]
    Positive,
    /// Every training sample; those without task positives supervise the
    /// task's classes as all-negative.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub scenario: Scenario,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            scenario: Scenario::new(4, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    pub task_data: TaskData,
    /// Generator settings; its seed is replaced by the run seed unless
    /// `synth_seed` is set.
    pub synth: SynthSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 64,
            activation: Activation::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub per_class: usize,
    /// Relabeling threshold `n`: positive iff probability > n.
    pub threshold: f64,
    /// Replay mini-batch size; the training batch size when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_batch: Option<usize>,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            per_class: 5,
            threshold: 0.5,
            replay_batch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_base: f64,
    pub lr_incremental: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Profile::Desk.train_defaults()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub profile: Profile,
    pub seed: u64,
    pub method: MethodVariant,
    pub schedule: ScheduleConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub loss: LossHyperParams,
    pub memory: MemoryConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Profile::Desk.defaults()
    }
}

impl Profile {
    fn train_defaults(self) -> TrainConfig {
        match self {
            Profile::Desk => TrainConfig {
                batch_size: 32,
                epochs: 20,
                lr_base: 2e-3,
                lr_incremental: 1e-3,
                weight_decay: 1e-4,
            },
            Profile::Full => TrainConfig {
                batch_size: 64,
                epochs: 20,
                lr_base: 4e-5,
                lr_incremental: 4e-5,
                weight_decay: 1e-4,
            },
        }
    }

    pub fn defaults(self) -> RunConfig {
        RunConfig {
            profile: self,
            seed: 0,
            method: MethodVariant::Rebll,
            schedule: ScheduleConfig::default(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            loss: LossHyperParams::default(),
            memory: MemoryConfig::default(),
            train: self.train_defaults(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn replay_batch(&self) -> usize {
        self.memory.replay_batch.unwrap_or(self.train.batch_size)
    }

    /// Synthetic spec with the effective seed applied.
    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.data.synth_seed.unwrap_or(self.seed),
            ..self.data.synth.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, msg: &str| Err(Error::config(key, msg));
        self.loss.validate()?;
        if self.train.batch_size == 0 {
            return fail("train.batch_size", "must be at least 1");
        }
        if self.train.epochs == 0 {
            return fail("train.epochs", "must be at least 1");
        }
        for (key, v) in [
            ("train.lr_base", self.train.lr_base),
            ("train.lr_incremental", self.train.lr_incremental),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(key, "must be a positive number");
            }
        }
        if !(self.train.weight_decay >= 0.0 && self.train.weight_decay.is_finite()) {
            return fail("train.weight_decay", "must be >= 0");
        }
        if self.model.hidden == 0 {
            return fail("model.hidden", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.memory.threshold) {
            return fail("memory.threshold", "must lie in [0, 1)");
        }
        if self.memory.replay_batch == Some(0) {
            return fail("memory.replay_batch", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.eval.threshold) {
            return fail("eval.threshold", "must lie in [0, 1)");
        }
        if self.schedule.scenario.increment == 0 {
            return fail("schedule.scenario", "increment must be at least 1");
        }
        match self.data.source {
            DataSource::Csv => {
                if self.data.train.is_none() {
                    return fail("data.train", "required when data.source = \"csv\"");
                }
                if self.data.test.is_none() {
                    return fail("data.test", "required when data.source = \"csv\"");
                }
            }
            DataSource::Synthetic => self
                .synth_spec()
                .validate()
                .map_err(|e| Error::config("data.synth", e.to_string()))?,
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Keys that may be absent from the serialized defaults, with their kind.
const OPTIONAL_KEYS: &[(&str, Kind)] = &[
    ("data.train", Kind::String),
    ("data.test", Kind::String),
    ("data.synth_seed", Kind::Integer),
    ("memory.replay_batch", Kind::Integer),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    String,
    Integer,
    Float,
    Boolean,
    Table,
    Other,
}

fn kind(v: &Value) -> Kind {
    match v {
        Value::String(_) => Kind::String,
        Value::Integer(_) => Kind::Integer,
        Value::Float(_) => Kind::Float,
        Value::Boolean(_) => Kind::Boolean,
        Value::Table(_) => Kind::Table,
        _ => Kind::Other,
    }
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::String => "string",
        Kind::Integer => "integer",
        Kind::Float => "float",
        Kind::Boolean => "boolean",
        Kind::Table => "section",
        Kind::Other => "value",
    }
}

/// Checks `user` against the shape of `schema`, widening integers to floats
/// where a float is expected.
fn check_against(schema: &Table, user: &mut Table, prefix: &str) -> Result<()> {
    for (key, value) in user.iter_mut() {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let expected = match schema.get(key) {
            Some(v) => kind(v),
            None => match OPTIONAL_KEYS.iter().find(|(k, _)| *k == path) {
                Some((_, k)) => *k,
                None => return Err(Error::config(path, "unknown key")),
            },
        };
        let actual = kind(value);
        match (expected, actual) {
            (Kind::Table, Kind::Table) => {
                let sub = schema.get(key).and_then(Value::as_table).expect("table");
                check_against(sub, value.as_table_mut().expect("table"), &path)?;
            }
            (Kind::Float, Kind::Integer) => {
                let i = value.as_integer().expect("integer");
                *value = Value::Float(i as f64);
            }
            (e, a) if e == a => {}
            (e, a) => {
                return Err(Error::config(
                    path,
                    format!("expected {}, found {}", kind_name(e), kind_name(a)),
                ))
            }
        }
    }
    Ok(())
}

fn leaf_paths(table: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => leaf_paths(t, &path, out),
            _ => out.push(path),
        }
    }
}

/// Resolves a short override key (`alpha`) to its dotted path (`loss.alpha`).
fn resolve_key(key: &str) -> Result<String> {
    let schema = Table::try_from(RunConfig::default()).expect("config serializes");
    let mut paths = Vec::new();
    leaf_paths(&schema, "", &mut paths);
    paths.extend(OPTIONAL_KEYS.iter().map(|(k, _)| k.to_string()));
    if key.contains('.') || paths.iter().any(|p| p == key) {
        return Ok(key.to_string());
    }
    let matches: Vec<&String> = paths
        .iter()
        .filter(|p| p.rsplit('.').next() == Some(key))
        .collect();
    match matches.as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(Error::config(key, "unknown key")),
        many => Err(Error::config(
            key,
            format!(
                "ambiguous key, use one of {}",
                many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            ),
        )),
    }
}

fn parse_value(text: &str) -> Value {
    let text = text.trim();
    match format!("v = {text}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(text.to_string()),
    }
}

fn set_path(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts.pop().expect("non-empty path");
    let mut cur = table;
    let mut walked = String::new();
    for part in parts {
        if !walked.is_empty() {
            walked.push('.');
        }
        walked.push_str(part);
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(walked.clone(), "is not a section"))?;
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

/// Parses `key=value` overrides onto a raw table.
pub fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::config(item.clone(), "override must look like key=value"))?;
        let path = resolve_key(key.trim())?;
        set_path(table, &path, parse_value(value))?;
    }
    Ok(())
}

/// Parses config text plus overrides into a validated [`RunConfig`].
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut user: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
    apply_overrides(&mut user, overrides)?;

    let profile = match user.get("profile") {
        None => Profile::default(),
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("profile", e.message().to_string()))?,
    };
    let mut merged = Table::try_from(profile.defaults()).expect("config serializes");
    check_against(&merged.clone(), &mut user, "")?;
    merge(&mut merged, user);

    let config: RunConfig = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Error::config("<config>", e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Reads a config file (`None` means an empty file) and applies overrides.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}
