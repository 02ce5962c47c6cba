//! Experiment configuration.
//!
//! A config is one flat JSON object. Keys mirror [`FederationConfig`] and
//! [`ModelConfig`] field names, plus the data source, the list of runs and
//! output settings. Unknown keys are rejected. Relative paths resolve
//! against the directory holding the config file.
//!
//! | key | default |
//! |---|---|
//! | `train` / `synthetic` | one of the two is required |
//! | `test` | split from `train` by `test_fraction` |
//! | `test_fraction` | 0.2 |
//! | `num_topics`, `rounds`, `runs` | required |
//! | `hidden_sizes` | `[100, 100]` |
//! | `prior_alpha` | 0.02 |
//! | `learning_rate` | 0.002 |
//! | `batch_size` | 64 |
//! | `optimizer` | Adam(0.9, 0.999, 1e-8) |
//! | `num_clients` | 10 |
//! | `local_iterations` | 10 |
//! | `prune_interval` | `max(1, rounds / 20)` |
//! | `ramp_fraction` | 0.2 |
//! | `time_model` | overhead 0.05 s, 1e-6 s per parameter |
//! | `partition` | `"iid"` |
//! | `weighting` | `"doc_count"` |
//! | `eval_interval` | `max(1, rounds / 10)` |
//! | `seed` | 0 |
//! | `threads` | `null` (global pool) |
//! | `output_dir` | `"results"` |
//! | `accuracy_thresholds` | `[]` |

use std::fs;
use std::path::{Path, PathBuf};

use fedtopic::synthetic::SyntheticSpec;
use fedtopic::{
    FederationConfig, ModelConfig, OptimizerKind, PartitionMode, PruneSchedule, ScheduleKind, TimeModel, Weighting,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("config is not valid JSON: {0}")]
    Syntax(#[from] serde_json::Error),

    #[error("{0} must be a JSON object")]
    NotObject(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("missing key `{0}`")]
    MissingKey(String),

    #[error("`{key}`: {message}")]
    InvalidValue { key: String, message: String },

    #[error("`{key}` out of range: {message}")]
    OutOfRange { key: String, message: String },

    #[error("duplicate run label `{0}`")]
    DuplicateLabel(String),

    #[error("`train` and `synthetic` cannot both be set")]
    ConflictingData,
}

fn out_of_range(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleChoice {
    None,
    Normal,
    Fast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub schedule: ScheduleChoice,
    /// 1.0 for unpruned runs.
    pub final_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { train: PathBuf, test: Option<PathBuf> },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub data: DataSource,
    /// Held-out share when no test file is given.
    pub test_fraction: f64,
    /// Shared settings; `schedule` is left empty and filled per run.
    pub federation: FederationConfig,
    pub prune_interval: usize,
    pub ramp_fraction: f64,
    pub runs: Vec<RunSpec>,
    pub output_dir: PathBuf,
    pub accuracy_thresholds: Vec<f64>,
}

impl ExperimentSpec {
    /// Federation config for one run.
    pub fn run_config(&self, run: &RunSpec) -> FederationConfig {
        let mut cfg = self.federation.clone();
        let kind = match run.schedule {
            ScheduleChoice::None => None,
            ScheduleChoice::Normal => Some(ScheduleKind::Normal),
            ScheduleChoice::Fast => Some(ScheduleKind::Fast {
                ramp_fraction: self.ramp_fraction,
            }),
        };
        cfg.schedule = kind.map(|kind| PruneSchedule {
            kind,
            final_density: run.final_density,
            total_rounds: cfg.rounds,
            prune_interval: self.prune_interval,
        });
        cfg
    }

    /// The spec as a fully explicit config. Parsing the result yields an
    /// equal spec.
    pub fn to_json(&self) -> Value {
        let fed = &self.federation;
        let model = &fed.model;
        let mut m = Map::new();
        match &self.data {
            DataSource::Files { train, test } => {
                m.insert("train".into(), json!(train));
                if let Some(t) = test {
                    m.insert("test".into(), json!(t));
                }
            }
            DataSource::Synthetic(s) => {
                m.insert("synthetic".into(), json!(s));
            }
        }
        let runs: Vec<Value> = self
            .runs
            .iter()
            .map(|r| json!({"label": r.label, "schedule": r.schedule, "final_density": r.final_density}))
            .collect();
        let rest = json!({
            "test_fraction": self.test_fraction,
            "num_topics": model.num_topics,
            "hidden_sizes": model.hidden_sizes,
            "prior_alpha": model.prior_alpha,
            "learning_rate": model.learning_rate,
            "batch_size": model.batch_size,
            "optimizer": model.optimizer,
            "num_clients": fed.num_clients,
            "local_iterations": fed.local_iterations,
            "rounds": fed.rounds,
            "prune_interval": self.prune_interval,
            "ramp_fraction": self.ramp_fraction,
            "time_model": fed.time_model,
            "partition": fed.partition,
            "weighting": fed.weighting,
            "eval_interval": fed.eval_interval,
            "seed": fed.seed,
            "threads": fed.threads,
            "runs": runs,
            "output_dir": self.output_dir,
            "accuracy_thresholds": self.accuracy_thresholds,
        });
        if let Value::Object(rest) = rest {
            m.extend(rest);
        }
        Value::Object(m)
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

/// Parses config text, resolving relative paths against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<ExperimentSpec, ConfigError> {
    let value: Value = serde_json::from_str(text)?;
    let mut f = Fields::new(value, "config")?;

    let synthetic: Option<SyntheticSpec> = f.take("synthetic")?;
    let train: Option<PathBuf> = f.take("train")?;
    let test: Option<PathBuf> = f.take("test")?;
    let data = match (train, synthetic) {
        (Some(_), Some(_)) => return Err(ConfigError::ConflictingData),
        (None, None) => return Err(ConfigError::MissingKey("train".into())),
        (Some(train), None) => DataSource::Files {
            train: base.join(train),
            test: test.map(|t| base.join(t)),
        },
        (None, Some(s)) => {
            if test.is_some() {
                return Err(ConfigError::InvalidValue {
                    key: "test".into(),
                    message: "a synthetic corpus is split with `test_fraction`".into(),
                });
            }
            s.validate().map_err(|e| ConfigError::InvalidValue {
                key: "synthetic".into(),
                message: e.to_string(),
            })?;
            DataSource::Synthetic(s)
        }
    };
    let test_fraction: f64 = f.take("test_fraction")?.unwrap_or(0.2);
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(out_of_range("test_fraction", "must lie in (0, 1)"));
    }

    let mut model = ModelConfig::new(0, f.require("num_topics")?);
    if model.num_topics < 2 {
        return Err(out_of_range("num_topics", "must be at least 2"));
    }
    if let Some(h) = f.take::<Vec<usize>>("hidden_sizes")? {
        if h.contains(&0) {
            return Err(out_of_range("hidden_sizes", "every layer needs at least one unit"));
        }
        model.hidden_sizes = h;
    }
    if let Some(a) = f.take("prior_alpha")? {
        model.prior_alpha = positive("prior_alpha", a)?;
    }
    if let Some(lr) = f.take("learning_rate")? {
        model.learning_rate = positive("learning_rate", lr)?;
    }
    if let Some(b) = f.take("batch_size")? {
        model.batch_size = at_least_one("batch_size", b)?;
    }
    if let Some(o) = f.take::<OptimizerKind>("optimizer")? {
        model.optimizer = o;
    }
    let mut probe = model.clone();
    probe.vocab_size = 2;
    probe.validate().map_err(|e| ConfigError::InvalidValue {
        key: "optimizer".into(),
        message: e.to_string(),
    })?;

    let rounds = at_least_one("rounds", f.require("rounds")?)?;
    let mut fed = FederationConfig::new(model, rounds);
    if let Some(n) = f.take("num_clients")? {
        fed.num_clients = at_least_one("num_clients", n)?;
    }
    if let Some(n) = f.take("local_iterations")? {
        fed.local_iterations = at_least_one("local_iterations", n)?;
    }
    let prune_interval = match f.take("prune_interval")? {
        Some(p) => at_least_one("prune_interval", p)?,
        None => FederationConfig::default_prune_interval(rounds),
    };
    let ramp_fraction: f64 = f.take("ramp_fraction")?.unwrap_or(ScheduleKind::DEFAULT_RAMP_FRACTION);
    if !(ramp_fraction > 0.0 && ramp_fraction <= 1.0) {
        return Err(out_of_range("ramp_fraction", "must lie in (0, 1]"));
    }
    if let Some(tm) = f.take::<TimeModel>("time_model")? {
        tm.validate().map_err(|e| out_of_range("time_model", e.to_string()))?;
        fed.time_model = tm;
    }
    if let Some(p) = f.take::<PartitionMode>("partition")? {
        if let PartitionMode::LabelDirichlet { concentration } = p {
            positive("partition", concentration)?;
        }
        fed.partition = p;
    }
    if let Some(w) = f.take::<Weighting>("weighting")? {
        fed.weighting = w;
    }
    fed.eval_interval = match f.take("eval_interval")? {
        Some(e) => at_least_one("eval_interval", e)?,
        None => (rounds / 10).max(1),
    };
    if let Some(s) = f.take("seed")? {
        fed.seed = s;
    }
    if let Some(t) = f.take::<Option<usize>>("threads")?.flatten() {
        fed.threads = Some(at_least_one("threads", t)?);
    }

    let raw_runs: Vec<Value> = f.require("runs")?;
    if raw_runs.is_empty() {
        return Err(out_of_range("runs", "at least one run is required"));
    }
    let mut runs: Vec<RunSpec> = Vec::with_capacity(raw_runs.len());
    for (i, raw) in raw_runs.into_iter().enumerate() {
        let run = parse_run(raw, i)?;
        if runs.iter().any(|r| r.label == run.label) {
            return Err(ConfigError::DuplicateLabel(run.label));
        }
        runs.push(run);
    }

    let output_dir = base.join(f.take::<PathBuf>("output_dir")?.unwrap_or_else(|| "results".into()));
    let accuracy_thresholds: Vec<f64> = f.take("accuracy_thresholds")?.unwrap_or_default();
    if accuracy_thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(out_of_range("accuracy_thresholds", "each threshold must lie in (0, 1]"));
    }
    f.finish()?;

    Ok(ExperimentSpec {
        data,
        test_fraction,
        federation: fed,
        prune_interval,
        ramp_fraction,
        runs,
        output_dir,
        accuracy_thresholds,
    })
}

fn parse_run(raw: Value, i: usize) -> Result<RunSpec, ConfigError> {
    let ctx = format!("runs[{i}]");
    let mut f = Fields::new(raw, &ctx)?;
    let label: String = f.require("label")?;
    if label.is_empty()
        || label.starts_with('.')
        || !label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
    {
        return Err(ConfigError::InvalidValue {
            key: format!("{ctx}.label"),
            message: format!("`{label}` must be non-empty ASCII letters, digits, `_`, `-` or `.`"),
        });
    }
    let schedule: ScheduleChoice = f.require("schedule")?;
    let key = format!("{ctx}.final_density");
    let final_density = match (schedule, f.take::<f64>("final_density")?) {
        (ScheduleChoice::None, None) => 1.0,
        (ScheduleChoice::None, Some(1.0)) => 1.0,
        (ScheduleChoice::None, Some(d)) => {
            return Err(out_of_range(&key, format!("an unpruned run keeps density 1, got {d}")))
        }
        (_, None) => return Err(ConfigError::MissingKey(key)),
        (_, Some(d)) if d > 0.0 && d <= 1.0 => d,
        (_, Some(d)) => return Err(out_of_range(&key, format!("must lie in (0, 1], got {d}"))),
    };
    f.finish()?;
    Ok(RunSpec {
        label,
        schedule,
        final_density,
    })
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(out_of_range(key, format!("must be positive, got {v}")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize, ConfigError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(out_of_range(key, "must be at least 1"))
    }
}

/// Keys of one JSON object, consumed one by one so leftovers are unknown.
struct Fields {
    map: Map<String, Value>,
    ctx: String,
}

impl Fields {
    fn new(value: Value, ctx: &str) -> Result<Self, ConfigError> {
        match value {
            Value::Object(map) => Ok(Self {
                map,
                ctx: ctx.to_string(),
            }),
            _ => Err(ConfigError::NotObject(ctx.to_string())),
        }
    }

    fn key(&self, key: &str) -> String {
        if self.ctx == "config" {
            key.to_string()
        } else {
            format!("{}.{key}", self.ctx)
        }
    }

    fn take<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v)
                .map(Some)
                .map_err(|e| ConfigError::InvalidValue {
                    key: self.key(key),
                    message: e.to_string(),
                }),
        }
    }

    fn require<T: DeserializeOwned>(&mut self, key: &str) -> Result<T, ConfigError> {
        self.take(key)?.ok_or_else(|| ConfigError::MissingKey(self.key(key)))
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.map.keys().next() {
            Some(k) => Err(ConfigError::UnknownKey(self.key(k))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Value {
        json!({
            "train": "data/train.bow",
            "num_topics": 5,
            "rounds": 40,
            "runs": [{"label": "unpruned", "schedule": "none"}]
        })
    }

    fn parse(v: &Value) -> Result<ExperimentSpec, ConfigError> {
        parse_config_str(&v.to_string(), Path::new("/exp"))
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let spec = parse(&minimal()).unwrap();
        assert_eq!(
            spec.data,
            DataSource::Files {
                train: "/exp/data/train.bow".into(),
                test: None
            }
        );
        assert_eq!(spec.test_fraction, 0.2);
        assert_eq!(spec.federation.num_clients, 10);
        assert_eq!(spec.federation.local_iterations, 10);
        assert_eq!(spec.federation.model.hidden_sizes, vec![100, 100]);
        assert_eq!(spec.federation.model.batch_size, 64);
        assert_eq!(spec.federation.time_model, TimeModel::default());
        assert_eq!(spec.federation.eval_interval, 4);
        assert_eq!(spec.prune_interval, 2);
        assert_eq!(spec.ramp_fraction, 0.2);
        assert_eq!(spec.output_dir, PathBuf::from("/exp/results"));
        assert_eq!(spec.runs[0].final_density, 1.0);
        assert!(spec.accuracy_thresholds.is_empty());
    }

    #[test]
    fn errors_name_the_offending_key() {
        let mut v = minimal();
        v["runs"] = json!([{"label": "a", "schedule": "normal", "final_density": 1.5}]);
        let err = parse(&v).unwrap_err();
        assert!(matches!(&err, ConfigError::OutOfRange { key, .. } if key == "runs[0].final_density"));
        assert!(err.to_string().contains("final_density"));

        let mut v = minimal();
        v["runs"] = json!([{"label": "a", "schedule": "fast", "final_density": 0.0}]);
        assert!(matches!(parse(&v), Err(ConfigError::OutOfRange { .. })));

        let mut v = minimal();
        v["runs"] = json!([{"label": "a", "schedule": "fast"}]);
        assert!(matches!(parse(&v), Err(ConfigError::MissingKey(k)) if k == "runs[0].final_density"));

        let mut v = minimal();
        v["roundz"] = json!(3);
        assert!(matches!(parse(&v), Err(ConfigError::UnknownKey(k)) if k == "roundz"));

        let mut v = minimal();
        v["runs"][0]["colour"] = json!("red");
        assert!(matches!(parse(&v), Err(ConfigError::UnknownKey(k)) if k == "runs[0].colour"));

        let mut v = minimal();
        v.as_object_mut().unwrap().remove("rounds");
        assert!(matches!(parse(&v), Err(ConfigError::MissingKey(k)) if k == "rounds"));

        let mut v = minimal();
        v["rounds"] = json!("many");
        assert!(matches!(parse(&v), Err(ConfigError::InvalidValue { key, .. }) if key == "rounds"));
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let mut v = minimal();
        v["runs"] = json!([
            {"label": "a", "schedule": "none"},
            {"label": "a", "schedule": "fast", "final_density": 0.2}
        ]);
        assert!(matches!(parse(&v), Err(ConfigError::DuplicateLabel(l)) if l == "a"));
    }

    #[test]
    fn data_source_rules() {
        let mut v = minimal();
        v["synthetic"] = json!({"num_docs": 10, "vocab_size": 20, "num_topics": 2, "seed": 1});
        assert!(matches!(parse(&v), Err(ConfigError::ConflictingData)));
        v.as_object_mut().unwrap().remove("train");
        let spec = parse(&v).unwrap();
        assert!(matches!(spec.data, DataSource::Synthetic(ref s) if s.min_doc_len == 40));
        v.as_object_mut().unwrap().remove("synthetic");
        assert!(matches!(parse(&v), Err(ConfigError::MissingKey(k)) if k == "train"));
    }

    #[test]
    fn labels_must_be_file_safe() {
        for bad in ["", "../x", "a b", ".hidden"] {
            let mut v = minimal();
            v["runs"][0]["label"] = json!(bad);
            assert!(parse(&v).is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn explicit_form_round_trips() {
        let mut v = minimal();
        v["test"] = json!("t.bow");
        v["runs"] = json!([
            {"label": "unpruned", "schedule": "none"},
            {"label": "normal-0.2", "schedule": "normal", "final_density": 0.2},
            {"label": "fast-0.2", "schedule": "fast", "final_density": 0.2}
        ]);
        v["partition"] = json!({"label_dirichlet": {"concentration": 0.5}});
        v["optimizer"] = json!("sgd");
        v["threads"] = json!(2);
        v["time_model"] = json!({"overhead_s": 0.1, "per_param_s": 2e-6, "per_layer_s": {"beta": 1e-6}});
        v["accuracy_thresholds"] = json!([0.5, 0.7]);
        let spec = parse(&v).unwrap();
        let again = parse_config_str(&spec.to_json().to_string(), Path::new("/elsewhere")).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn run_config_sets_the_schedule() {
        let mut v = minimal();
        v["runs"] = json!([
            {"label": "u", "schedule": "none"},
            {"label": "f", "schedule": "fast", "final_density": 0.3}
        ]);
        v["ramp_fraction"] = json!(0.5);
        let spec = parse(&v).unwrap();
        assert_eq!(spec.run_config(&spec.runs[0]).schedule, None);
        let s = spec.run_config(&spec.runs[1]).schedule.unwrap();
        assert_eq!(s.kind, ScheduleKind::Fast { ramp_fraction: 0.5 });
        assert_eq!((s.final_density, s.total_rounds, s.prune_interval), (0.3, 40, 2));
    }
}
