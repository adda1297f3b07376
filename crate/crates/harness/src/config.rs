//! Run configuration: a flat `key = value` file merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use choice_core::baselines::SelectionStrategy;
use choice_core::bundle::ModelKind;
use choice_core::textfmt;
use choice_envs::{TaskKind, TaskSpec};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Keys accepted in a config file, spelled as the long flags without dashes.
pub const KEYS: [&str; 19] = [
    "task",
    "algo",
    "k",
    "horizon",
    "width",
    "epochs",
    "batch",
    "seed",
    "train-seed",
    "eval-seed",
    "episodes",
    "eval-episodes",
    "max-steps",
    "selection",
    "calls",
    "out",
    "data",
    "checkpoint",
    "rollouts",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Choice,
    Bc,
    Denoiser,
    /// The noise-free demonstrator; evaluation only.
    Scripted,
}

impl Algo {
    pub fn model_kind(self) -> Option<ModelKind> {
        match self {
            Self::Choice => Some(ModelKind::Choice),
            Self::Bc => Some(ModelKind::Bc),
            Self::Denoiser => Some(ModelKind::Denoiser),
            Self::Scripted => None,
        }
    }
}

impl From<ModelKind> for Algo {
    fn from(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Choice => Self::Choice,
            ModelKind::Bc => Self::Bc,
            ModelKind::Denoiser => Self::Denoiser,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.model_kind() {
            Some(k) => k.fmt(f),
            None => f.write_str("scripted"),
        }
    }
}

impl FromStr for Algo {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "scripted" {
            return Ok(Self::Scripted);
        }
        s.parse::<ModelKind>()
            .map(Self::from)
            .map_err(|_| HarnessError::Config(format!("unknown algorithm `{s}` (choice, bc, denoiser, scripted)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskKind,
    pub algo: Algo,
    pub k: usize,
    pub horizon: usize,
    /// Hidden and feature width of every network.
    pub width: usize,
    pub epochs: usize,
    pub batch: usize,
    /// Seed of the demonstration data.
    pub seed: u64,
    pub train_seed: u64,
    pub eval_seed: u64,
    /// Number of demonstrations.
    pub episodes: usize,
    pub eval_episodes: usize,
    /// Step budget per rollout; the task's own cap when absent.
    pub max_steps: Option<usize>,
    pub selection: SelectionStrategy,
    /// Inference calls per model in a latency benchmark.
    pub calls: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::Fork,
            algo: Algo::Choice,
            k: 5,
            horizon: 8,
            width: 64,
            epochs: 200,
            batch: 64,
            seed: 0,
            train_seed: 0,
            eval_seed: 0,
            episodes: 200,
            eval_episodes: 100,
            max_steps: None,
            selection: SelectionStrategy::Score,
            calls: 1000,
        }
    }
}

/// Files named in the configuration. Relative defaults live under `out`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paths {
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub rollouts: Option<PathBuf>,
}

impl Paths {
    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| HarnessError::Config("--out is required".into()))
    }

    pub fn data_file(&self) -> Result<PathBuf> {
        match &self.data {
            Some(p) => Ok(p.clone()),
            None => Ok(self.out_dir()?.join(crate::artifact::DATASET_FILE)),
        }
    }

    pub fn rollout_file(&self) -> Result<PathBuf> {
        match &self.rollouts {
            Some(p) => Ok(p.clone()),
            None => Ok(self.out_dir()?.join(crate::artifact::ROLLOUT_FILE)),
        }
    }

    /// The single checkpoint to load, defaulting to the one `train` writes into `out`.
    pub fn checkpoint_file(&self) -> Result<PathBuf> {
        match self.checkpoints.as_slice() {
            [] => Ok(self.out_dir()?.join(crate::artifact::CHECKPOINT_FILE)),
            [one] => Ok(one.clone()),
            _ => Err(HarnessError::Config("this command takes one --checkpoint".into())),
        }
    }
}

/// Parses a config file body: one `key = value` per line, `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = normalize_key(k.trim());
        if !KEYS.contains(&key.as_str()) {
            return Err(HarnessError::Config(format!("config line {}: unknown key `{}`", i + 1, k.trim())));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn normalize_key(k: &str) -> String {
    k.replace('_', "-")
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("invalid value `{value}` for `{key}`")))
}

/// Builds a configuration from config-file pairs overridden by flag pairs.
/// Within a layer later pairs win; `checkpoint` entries accumulate, and any
/// checkpoint flag replaces the file's list.
pub fn resolve(file: &[(String, String)], flags: &[(String, String)]) -> Result<(RunConfig, Paths)> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut checkpoints = Vec::new();
    for layer in [file, flags] {
        let mut layer_checkpoints = Vec::new();
        for (k, v) in layer {
            let key = normalize_key(k);
            if !KEYS.contains(&key.as_str()) {
                return Err(HarnessError::Config(format!("unknown key `{k}`")));
            }
            if key == "checkpoint" {
                layer_checkpoints.extend(v.split(',').map(|s| PathBuf::from(s.trim())));
            } else {
                map.insert(key, v.clone());
            }
        }
        if !layer_checkpoints.is_empty() {
            checkpoints = layer_checkpoints;
        }
    }
    let mut c = RunConfig::default();
    let get = |k: &str| map.get(k).map(String::as_str);
    if let Some(v) = get("task") {
        c.task = v.parse().map_err(|e: choice_envs::EnvError| HarnessError::Config(e.to_string()))?;
    }
    if let Some(v) = get("algo") {
        c.algo = v.parse()?;
    }
    if let Some(v) = get("k") {
        c.k = parse_value("k", v)?;
    }
    if let Some(v) = get("horizon") {
        c.horizon = parse_value("horizon", v)?;
    }
    if let Some(v) = get("width") {
        c.width = parse_value("width", v)?;
    }
    if let Some(v) = get("epochs") {
        c.epochs = parse_value("epochs", v)?;
    }
    if let Some(v) = get("batch") {
        c.batch = parse_value("batch", v)?;
    }
    if let Some(v) = get("seed") {
        c.seed = parse_value("seed", v)?;
    }
    c.train_seed = match get("train-seed") {
        Some(v) => parse_value("train-seed", v)?,
        None => c.seed,
    };
    c.eval_seed = match get("eval-seed") {
        Some(v) => parse_value("eval-seed", v)?,
        None => c.seed,
    };
    if let Some(v) = get("episodes") {
        c.episodes = parse_value("episodes", v)?;
    }
    if let Some(v) = get("eval-episodes") {
        c.eval_episodes = parse_value("eval-episodes", v)?;
    }
    if let Some(v) = get("max-steps") {
        c.max_steps = Some(parse_value("max-steps", v)?);
    }
    if let Some(v) = get("selection") {
        c.selection = v.parse().map_err(|e: choice_core::Error| HarnessError::Config(e.to_string()))?;
    }
    if let Some(v) = get("calls") {
        c.calls = parse_value("calls", v)?;
    }
    c.validate()?;
    let paths = Paths {
        out: get("out").map(PathBuf::from),
        data: get("data").map(PathBuf::from),
        checkpoints,
        rollouts: get("rollouts").map(PathBuf::from),
    };
    Ok((c, paths))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k),
            ("horizon", self.horizon),
            ("width", self.width),
            ("batch", self.batch),
            ("episodes", self.episodes),
            ("eval-episodes", self.eval_episodes),
            ("calls", self.calls),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(HarnessError::Config(format!("`{name}` must be positive")));
            }
        }
        if self.max_steps == Some(0) {
            return Err(HarnessError::Config("`max-steps` must be positive".into()));
        }
        if let SelectionStrategy::Single(i) = self.selection {
            if i >= self.k {
                return Err(HarnessError::Config(format!("selection single:{i} needs k > {i}")));
            }
        }
        Ok(())
    }

    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec::default_for(self.task)
    }

    fn data_fields(&self) -> Result<Vec<(&'static str, String)>> {
        Ok(vec![
            ("schema", SCHEMA_VERSION.to_string()),
            ("task", textfmt::to_json(&self.task_spec())?),
            ("seed", self.seed.to_string()),
            ("episodes", self.episodes.to_string()),
        ])
    }

    fn model_fields(&self) -> Result<Vec<(&'static str, String)>> {
        let mut f = self.data_fields()?;
        f.extend([
            ("algo", self.algo.to_string()),
            ("k", self.k.to_string()),
            ("horizon", self.horizon.to_string()),
            ("width", self.width.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch", self.batch.to_string()),
            ("train-seed", self.train_seed.to_string()),
        ]);
        Ok(f)
    }

    fn eval_fields(&self) -> Result<Vec<(&'static str, String)>> {
        let mut f = self.model_fields()?;
        f.extend([
            ("selection", self.selection.to_string()),
            ("eval-seed", self.eval_seed.to_string()),
            ("eval-episodes", self.eval_episodes.to_string()),
            ("max-steps", self.max_steps.map_or("task".into(), |m| m.to_string())),
        ]);
        Ok(f)
    }

    /// Identifies a demonstration dataset: task, data seed and episode count.
    pub fn data_hash(&self) -> Result<String> {
        Ok(hash_fields(&self.data_fields()?))
    }

    /// Identifies a trained model: the data hash inputs plus every training setting.
    pub fn model_hash(&self) -> Result<String> {
        Ok(hash_fields(&self.model_fields()?))
    }

    /// Identifies an evaluation: the model hash inputs plus selection and evaluation settings.
    pub fn eval_hash(&self) -> Result<String> {
        Ok(hash_fields(&self.eval_fields()?))
    }

    /// Every setting as `key = value` lines, in config-file syntax.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("task", self.task.to_string());
        line("algo", self.algo.to_string());
        line("k", self.k.to_string());
        line("horizon", self.horizon.to_string());
        line("width", self.width.to_string());
        line("epochs", self.epochs.to_string());
        line("batch", self.batch.to_string());
        line("seed", self.seed.to_string());
        line("train-seed", self.train_seed.to_string());
        line("eval-seed", self.eval_seed.to_string());
        line("episodes", self.episodes.to_string());
        line("eval-episodes", self.eval_episodes.to_string());
        if let Some(m) = self.max_steps {
            line("max-steps", m.to_string());
        }
        line("selection", self.selection.to_string());
        line("calls", self.calls.to_string());
        s
    }
}

fn hash_fields(fields: &[(&str, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in fields {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}
