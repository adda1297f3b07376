//! Demonstration generation and the line-oriented dataset file.
//!
//! The first line is a JSON header (schema version, config hash, seed,
//! episode count, full task spec). Every following line is one step:
//! `{"action":[..],"episode":e,"mode":m,"obs":[..],"phase":"name","t":t}`.
//! Reals are written with 17 significant digits.

use choice_core::numerics::SeededRng;
use choice_core::policy::{ActionChunk, Sample};
use choice_core::textfmt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, TaskSpec};
use crate::error::{EnvError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub episodes: usize,
    pub task: TaskSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub phase: usize,
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Which demonstration mode produced this episode.
    pub mode: usize,
    /// Seed of the episode's own random stream.
    pub seed: u64,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub episodes: Vec<EpisodeRecord>,
}

/// Random stream of episode `episode` under dataset seed `seed`.
pub fn episode_rng(seed: u64, episode: usize) -> SeededRng {
    SeededRng::new(seed).split(episode as u64)
}

/// Runs the noisy demonstrator once. The mode is drawn uniformly from the
/// episode's stream, so `(seed, episode)` fixes everything.
pub fn demonstrate(env: &dyn Environment, seed: u64, episode: usize) -> Result<EpisodeRecord> {
    let mut rng = episode_rng(seed, episode);
    let mode = rng.index(env.num_modes());
    let mut expert = env.expert(mode, env.demo_noise())?;
    let mut state = env.initial_state(&mut rng);
    let mut steps = Vec::new();
    while !state.is_terminal() && steps.len() < env.horizon_cap() {
        let obs = env.observe(&state);
        let action = expert.act(&state, &mut rng);
        steps.push(StepRecord {
            t: steps.len(),
            phase: state.phase,
            obs,
            action: action.clone(),
        });
        state = env.step(&state, &action)?;
    }
    if !state.success {
        let reason = state
            .failure
            .unwrap_or_else(|| format!("not finished within {} steps", env.horizon_cap()));
        return Err(EnvError::Demonstration { episode, mode, reason });
    }
    Ok(EpisodeRecord {
        episode,
        mode,
        seed: rng.seed(),
        steps,
    })
}

pub fn generate(env: &dyn Environment, seed: u64, episodes: usize, config_hash: &str) -> Result<Dataset> {
    if episodes == 0 {
        return Err(EnvError::InvalidInput("episode count must be positive".into()));
    }
    let records = (0..episodes)
        .into_par_iter()
        .map(|e| demonstrate(env, seed, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        header: DatasetHeader {
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash.to_string(),
            seed,
            episodes,
            task: env.spec(),
        },
        episodes: records,
    })
}

#[derive(Serialize, Deserialize)]
struct Line {
    episode: usize,
    t: usize,
    phase: String,
    obs: Vec<f64>,
    action: Vec<f64>,
    mode: usize,
}

impl Dataset {
    pub fn to_text(&self) -> Result<String> {
        let env = self.header.task.build()?;
        let names = env.phase_names();
        let mut out = textfmt::to_json(&self.header)?;
        out.push('\n');
        for ep in &self.episodes {
            for s in &ep.steps {
                let line = Line {
                    episode: ep.episode,
                    t: s.t,
                    phase: names[s.phase].to_string(),
                    obs: s.obs.clone(),
                    action: s.action.clone(),
                    mode: ep.mode,
                };
                out.push_str(&textfmt::to_json(&line)?);
                out.push('\n');
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| EnvError::Parse {
            line: 1,
            message: "empty dataset".into(),
        })?;
        let header: DatasetHeader = serde_json::from_str(first).map_err(|e| EnvError::Parse {
            line: 1,
            message: format!("bad header: {e}"),
        })?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(EnvError::Parse {
                line: 1,
                message: format!(
                    "schema version {} is not supported (expected {SCHEMA_VERSION})",
                    header.schema_version
                ),
            });
        }
        let env = header.task.build()?;
        let names = env.phase_names();
        let mut episodes: Vec<EpisodeRecord> = Vec::new();
        for (i, raw) in lines {
            let n = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let err = |message: String| EnvError::Parse { line: n, message };
            let line: Line = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
            let phase = names
                .iter()
                .position(|p| *p == line.phase)
                .ok_or_else(|| err(format!("unknown phase {:?}", line.phase)))?;
            if line.obs.len() != env.obs_dim() || line.action.len() != env.action_dim() {
                return Err(err(format!(
                    "expected {} observation and {} action values",
                    env.obs_dim(),
                    env.action_dim()
                )));
            }
            if line.mode >= env.num_modes() {
                return Err(err(format!("mode {} out of range", line.mode)));
            }
            let starts_new = episodes.last().is_none_or(|e| e.episode != line.episode);
            if starts_new {
                if line.t != 0 {
                    return Err(err(format!("episode {} does not start at t = 0", line.episode)));
                }
                if episodes.iter().any(|e| e.episode == line.episode) {
                    return Err(err(format!("episode {} is split", line.episode)));
                }
                episodes.push(EpisodeRecord {
                    episode: line.episode,
                    mode: line.mode,
                    seed: episode_rng(header.seed, line.episode).seed(),
                    steps: Vec::new(),
                });
            }
            let ep = episodes.last_mut().expect("episode was just pushed");
            if line.mode != ep.mode || line.t != ep.steps.len() {
                return Err(err(format!("step {} of episode {} is out of sequence", line.t, line.episode)));
            }
            ep.steps.push(StepRecord {
                t: line.t,
                phase,
                obs: line.obs,
                action: line.action,
            });
        }
        if episodes.len() != header.episodes {
            return Err(EnvError::Parse {
                line: 1,
                message: format!("header promises {} episodes, found {}", header.episodes, episodes.len()),
            });
        }
        Ok(Self { header, episodes })
    }

    pub fn mode_counts(&self, modes: usize) -> Vec<usize> {
        let mut counts = vec![0; modes];
        for e in &self.episodes {
            if e.mode < modes {
                counts[e.mode] += 1;
            }
        }
        counts
    }
}

/// A training pair plus where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkSample {
    pub sample: Sample,
    pub episode: usize,
    pub t: usize,
    pub phase: usize,
    pub mode: usize,
}

/// One sample per recorded step: the observation and the next `horizon`
/// actions, padded past the episode end with the task's idle action.
pub fn chunk_samples(env: &dyn Environment, episodes: &[EpisodeRecord], horizon: usize) -> Result<Vec<ChunkSample>> {
    if horizon == 0 {
        return Err(EnvError::InvalidInput("horizon must be positive".into()));
    }
    let idle = env.idle_action();
    let mut out = Vec::new();
    for ep in episodes {
        for (t, step) in ep.steps.iter().enumerate() {
            let rows: Vec<Vec<f64>> = (t..t + horizon)
                .map(|i| ep.steps.get(i).map_or_else(|| idle.clone(), |s| s.action.clone()))
                .collect();
            out.push(ChunkSample {
                sample: Sample {
                    obs: step.obs.clone(),
                    target: ActionChunk::from_rows(&rows)?,
                },
                episode: ep.episode,
                t,
                phase: step.phase,
                mode: ep.mode,
            });
        }
    }
    Ok(out)
}
