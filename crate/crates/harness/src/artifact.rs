//! On-disk artifacts. Every file starts with the schema version and the hash
//! of the configuration that produced it, and loaders refuse other hashes.
//!
//! JSON-lines files carry both in their first line; CSV and text files open
//! with `# schema_version <v> config_hash <hash>`.

use std::fs;
use std::path::Path;

use choice_core::bundle::PolicyBundle;
use choice_core::policy::FitLog;
use choice_core::textfmt;
use choice_envs::dataset::Dataset;
use choice_envs::Environment;
use serde::{Deserialize, Serialize};

use crate::config::{Algo, RunConfig, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOSS_FILE: &str = "loss.csv";
pub const ROLLOUT_FILE: &str = "rollouts.jsonl";
pub const SUMMARY_FILE: &str = "metrics.txt";
pub const TABLE_FILE: &str = "metrics.csv";
pub const HEADS_FILE: &str = "heads.csv";
pub const LATENCY_FILE: &str = "latency.csv";

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(HarnessError::io(path))
}

/// Writes `text`, creating parent directories as needed.
pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
        }
    }
    fs::write(path, text).map_err(HarnessError::io(path))
}

/// First line of CSV and text artifacts.
pub fn text_header(config_hash: &str) -> String {
    format!("# schema_version {SCHEMA_VERSION} config_hash {config_hash}\n")
}

/// Splits a CSV or text artifact into its config hash and body.
pub fn split_text_header(text: &str) -> Result<(String, &str)> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let fields: Vec<&str> = first.split_whitespace().collect();
    match fields.as_slice() {
        ["#", "schema_version", v, "config_hash", h] => {
            check_schema(v.parse().map_err(|_| HarnessError::Data(format!("bad schema version `{v}`")))?)?;
            Ok((h.to_string(), body))
        }
        _ => Err(HarnessError::Data("missing schema/config header line".into())),
    }
}

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(HarnessError::Data(format!(
            "schema version {v} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

pub fn check_hash(what: &str, found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(HarnessError::Data(format!(
            "{what} was produced by a different configuration (config hash {found}, expected {expected})"
        )));
    }
    Ok(())
}

/// Parses a dataset file and checks it belongs to `config`.
pub fn load_dataset(path: &Path, config: &RunConfig) -> Result<Dataset> {
    let d = Dataset::parse(&read(path)?)?;
    check_hash("dataset", &d.header.config_hash, &config.data_hash()?)?;
    if d.header.task != config.task_spec() {
        return Err(HarnessError::Data("dataset task differs from the configured task".into()));
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub schema_version: u32,
    pub config_hash: String,
    pub algo: String,
    pub task: String,
    pub k: usize,
    pub horizon: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
}

/// Header line followed by the bundle as one JSON line.
pub fn checkpoint_text(config: &RunConfig, bundle: &PolicyBundle) -> Result<String> {
    let header = CheckpointHeader {
        schema_version: SCHEMA_VERSION,
        config_hash: config.model_hash()?,
        algo: bundle.model.kind().to_string(),
        task: config.task.to_string(),
        k: bundle.model.num_proposals(),
        horizon: bundle.model.horizon(),
        obs_dim: bundle.model.obs_dim(),
        action_dim: bundle.model.action_dim(),
    };
    let body = serde_json::to_string(bundle).map_err(|e| HarnessError::Data(e.to_string()))?;
    Ok(format!("{}\n{body}\n", textfmt::to_json(&header)?))
}

fn split_checkpoint<'t>(path: &Path, text: &'t str) -> Result<(CheckpointHeader, &'t str)> {
    let (first, body) = text
        .split_once('\n')
        .ok_or_else(|| HarnessError::Data(format!("{}: truncated checkpoint", path.display())))?;
    let header: CheckpointHeader =
        serde_json::from_str(first).map_err(|e| HarnessError::Data(format!("checkpoint header: {e}")))?;
    check_schema(header.schema_version)?;
    Ok((header, body))
}

pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader> {
    Ok(split_checkpoint(path, &read(path)?)?.0)
}

/// Loads a checkpoint and checks it against `config` and the task it will run in.
pub fn load_checkpoint(path: &Path, config: &RunConfig, env: &dyn Environment) -> Result<PolicyBundle> {
    let text = read(path)?;
    let (header, body) = split_checkpoint(path, &text)?;
    let bundle: PolicyBundle =
        serde_json::from_str(body.trim_end()).map_err(|e| HarnessError::Data(format!("checkpoint body: {e}")))?;
    let m = &bundle.model;
    let algo = Algo::from(m.kind());
    let mut mismatches = Vec::new();
    if algo != config.algo {
        mismatches.push(format!("algo {algo} vs configured {}", config.algo));
    }
    if m.obs_dim() != env.obs_dim() || m.action_dim() != env.action_dim() {
        mismatches.push(format!(
            "model maps {} observation values to {} action values, task {} has {} and {}",
            m.obs_dim(),
            m.action_dim(),
            config.task,
            env.obs_dim(),
            env.action_dim()
        ));
    }
    if m.horizon() != config.horizon {
        mismatches.push(format!("horizon {} vs configured {}", m.horizon(), config.horizon));
    }
    if algo == Algo::Choice && m.num_proposals() != config.k {
        mismatches.push(format!("k {} vs configured {}", m.num_proposals(), config.k));
    }
    if !mismatches.is_empty() {
        return Err(HarnessError::Config(format!(
            "checkpoint {} does not fit the configuration: {}",
            path.display(),
            mismatches.join("; ")
        )));
    }
    check_hash("checkpoint", &header.config_hash, &config.model_hash()?)?;
    Ok(bundle)
}

/// Per-epoch mean losses as CSV.
pub fn loss_csv(config_hash: &str, log: &FitLog) -> String {
    let mut s = text_header(config_hash);
    s.push_str("epoch,total,action,score\n");
    for (i, e) in log.epochs.iter().enumerate() {
        s.push_str(&format!(
            "{i},{},{},{}\n",
            textfmt::real(e.total),
            textfmt::real(e.action),
            textfmt::real(e.score)
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutLogHeader {
    pub schema_version: u32,
    pub config_hash: String,
    pub task: String,
    pub algo: String,
    pub k: usize,
    pub phases: Vec<String>,
    pub eval_seed: u64,
    pub eval_episodes: usize,
}

/// One evaluated episode, reduced to what reports need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// Selection strategy for choice models, the algorithm name otherwise.
    pub label: String,
    pub episode: usize,
    pub success: bool,
    pub reason: Option<String>,
    pub stages: Vec<bool>,
    /// Phase of the state each action was chosen in.
    pub phases: Vec<usize>,
    pub heads: Vec<Option<usize>>,
}

/// Rank agreement between predicted scores and true proposal errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub pairs: usize,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum LogLine {
    Episode(EpisodeLog),
    Calibration(CalibrationRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutLog {
    pub header: RolloutLogHeader,
    pub episodes: Vec<EpisodeLog>,
    pub calibration: Option<CalibrationRecord>,
}

impl RolloutLog {
    pub fn to_text(&self) -> Result<String> {
        let mut s = textfmt::to_json(&self.header)?;
        s.push('\n');
        for e in &self.episodes {
            s.push_str(&textfmt::to_json(&LogLine::Episode(e.clone()))?);
            s.push('\n');
        }
        if let Some(c) = self.calibration {
            s.push_str(&textfmt::to_json(&LogLine::Calibration(c))?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| HarnessError::Data("empty rollout log".into()))?;
        let header: RolloutLogHeader =
            serde_json::from_str(first).map_err(|e| HarnessError::Data(format!("rollout log header: {e}")))?;
        check_schema(header.schema_version)?;
        let mut episodes = Vec::new();
        let mut calibration = None;
        for (i, line) in lines {
            let rec: LogLine = serde_json::from_str(line)
                .map_err(|e| HarnessError::Data(format!("rollout log line {}: {e}", i + 1)))?;
            match rec {
                LogLine::Episode(e) => {
                    if e.phases.len() != e.heads.len() || e.stages.len() != header.phases.len() {
                        return Err(HarnessError::Data(format!("rollout log line {}: inconsistent lengths", i + 1)));
                    }
                    if e.phases.iter().any(|&p| p >= header.phases.len())
                        || e.heads.iter().flatten().any(|&h| h >= header.k)
                    {
                        return Err(HarnessError::Data(format!("rollout log line {}: index out of range", i + 1)));
                    }
                    episodes.push(e);
                }
                LogLine::Calibration(c) => calibration = Some(c),
            }
        }
        Ok(Self {
            header,
            episodes,
            calibration,
        })
    }
}
