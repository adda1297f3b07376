//! The experiment steps behind each command, usable without touching files.

use std::time::Instant;

use choice_core::baselines::{BcConfig, BcModel, DenoiserConfig, DenoiserModel, SelectionStrategy};
use choice_core::bundle::{PolicyBundle, PolicyModel};
use choice_core::numerics::SeededRng;
use choice_core::policy::{per_proposal_loss, ChoiceConfig, ChoicePolicyModel, FitConfig, FitLog, NormalizationStats, Sample};
use choice_envs::dataset::{self, chunk_samples, ChunkSample, Dataset};
use choice_envs::rollout::{self, LearnedPolicy, Policy, ScriptedPolicy};
use choice_envs::Environment;

use crate::artifact::{CalibrationRecord, EpisodeLog, RolloutLog, RolloutLogHeader};
use crate::config::{Algo, RunConfig, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::stats::{latency_stats, spearman, LatencyStats};

/// Demonstrations drawn for score calibration and latency inputs.
pub const HELD_OUT_EPISODES: usize = 20;

pub fn build_env(config: &RunConfig) -> Result<Box<dyn Environment>> {
    Ok(config.task_spec().build()?)
}

pub fn generate_data(config: &RunConfig, env: &dyn Environment) -> Result<Dataset> {
    Ok(dataset::generate(env, config.seed, config.episodes, &config.data_hash()?)?)
}

/// Normalized (observation, chunk) pairs and the statistics used to normalize them.
pub fn training_samples(
    env: &dyn Environment,
    data: &Dataset,
    horizon: usize,
) -> Result<(Vec<Sample>, NormalizationStats)> {
    let raw: Vec<Sample> = chunk_samples(env, &data.episodes, horizon)?
        .into_iter()
        .map(|c| c.sample)
        .collect();
    let stats = NormalizationStats::from_samples(&raw)?;
    let samples = stats.normalize_samples(&raw)?;
    Ok((samples, stats))
}

pub fn fit_config(config: &RunConfig) -> FitConfig {
    FitConfig {
        epochs: config.epochs,
        batch_size: config.batch,
        seed: config.train_seed,
        ..FitConfig::default()
    }
}

pub fn choice_config(config: &RunConfig, env: &dyn Environment) -> ChoiceConfig {
    ChoiceConfig {
        num_proposals: config.k,
        horizon: config.horizon,
        feature_dim: config.width,
        hidden_dim: config.width,
        ..ChoiceConfig::new(env.obs_dim(), env.action_dim())
    }
}

pub fn bc_config(config: &RunConfig, env: &dyn Environment) -> BcConfig {
    BcConfig {
        horizon: config.horizon,
        action_dim: env.action_dim(),
        obs_dim: env.obs_dim(),
        feature_dim: config.width,
        hidden_dim: config.width,
    }
}

pub fn denoiser_config(config: &RunConfig, env: &dyn Environment) -> DenoiserConfig {
    DenoiserConfig {
        horizon: config.horizon,
        feature_dim: config.width,
        hidden_dim: config.width,
        ..DenoiserConfig::new(env.obs_dim(), env.action_dim())
    }
}

/// A freshly initialized model of the configured algorithm.
pub fn init_model(config: &RunConfig, env: &dyn Environment) -> Result<PolicyModel> {
    let mut rng = SeededRng::new(config.train_seed).split(1);
    Ok(match config.algo {
        Algo::Choice => PolicyModel::Choice(ChoicePolicyModel::new(choice_config(config, env), &mut rng)?),
        Algo::Bc => PolicyModel::Bc(BcModel::new(bc_config(config, env), &mut rng)?),
        Algo::Denoiser => PolicyModel::Denoiser(DenoiserModel::new(denoiser_config(config, env), &mut rng)?),
        Algo::Scripted => return Err(HarnessError::Config("the scripted policy is not trained".into())),
    })
}

pub fn train(config: &RunConfig, env: &dyn Environment, data: &Dataset) -> Result<(PolicyBundle, FitLog)> {
    let (samples, stats) = training_samples(env, data, config.horizon)?;
    let fit = fit_config(config);
    let mut model = init_model(config, env)?;
    let log = match &mut model {
        PolicyModel::Choice(m) => m.fit(&samples, &fit)?,
        PolicyModel::Bc(m) => m.fit(&samples, &fit)?,
        PolicyModel::Denoiser(m) => m.fit(&samples, &fit)?,
    };
    Ok((PolicyBundle::new(model, stats)?, log))
}

/// What `evaluate` runs.
#[derive(Clone, Copy)]
pub enum PolicySource<'a> {
    Scripted,
    Model(&'a PolicyBundle),
}

/// Rolls out every strategy over the same evaluation episodes. Strategies
/// only apply to choice models; other sources run once.
pub fn evaluate(
    config: &RunConfig,
    env: &dyn Environment,
    source: PolicySource<'_>,
    strategies: &[SelectionStrategy],
) -> Result<RolloutLog> {
    let max_steps = config.max_steps.unwrap_or(env.horizon_cap());
    let is_choice = matches!(source, PolicySource::Model(b) if matches!(b.model, PolicyModel::Choice(_)));
    let runs: Vec<(String, SelectionStrategy)> = if is_choice {
        strategies.iter().map(|s| (s.to_string(), *s)).collect()
    } else {
        vec![(config.algo.to_string(), SelectionStrategy::Score)]
    };
    let k = match source {
        PolicySource::Model(b) => b.model.num_proposals(),
        PolicySource::Scripted => 1,
    };
    let mut episodes = Vec::new();
    for (label, strategy) in runs {
        let results = match source {
            PolicySource::Scripted => rollout::evaluate(
                env,
                || Box::new(ScriptedPolicy::new(env)) as Box<dyn Policy>,
                config.eval_episodes,
                config.eval_seed,
                max_steps,
            )?,
            PolicySource::Model(bundle) => rollout::evaluate(
                env,
                || Box::new(LearnedPolicy { bundle, strategy }) as Box<dyn Policy>,
                config.eval_episodes,
                config.eval_seed,
                max_steps,
            )?,
        };
        episodes.extend(results.into_iter().map(|r| EpisodeLog {
            label: label.clone(),
            episode: r.episode,
            success: r.success,
            reason: r.reason,
            stages: r.stages,
            phases: r.steps.iter().map(|s| s.phase).collect(),
            heads: r.steps.iter().map(|s| s.head).collect(),
        }));
    }
    Ok(RolloutLog {
        header: RolloutLogHeader {
            schema_version: SCHEMA_VERSION,
            config_hash: config.eval_hash()?,
            task: config.task.to_string(),
            algo: config.algo.to_string(),
            k,
            phases: env.phase_names().iter().map(|p| p.to_string()).collect(),
            eval_seed: config.eval_seed,
            eval_episodes: config.eval_episodes,
        },
        episodes,
        calibration: None,
    })
}

/// Seed of the held-out demonstrations; never the training data seed.
pub fn held_out_seed(config: &RunConfig) -> u64 {
    let s = config.eval_seed ^ 0x6865_6c64_6f75_74;
    if s == config.seed {
        s.wrapping_add(1)
    } else {
        s
    }
}

/// Fresh demonstrations for calibration, chunked like training data (raw units).
pub fn held_out_samples(config: &RunConfig, env: &dyn Environment) -> Result<Vec<ChunkSample>> {
    let d = dataset::generate(env, held_out_seed(config), HELD_OUT_EPISODES, "")?;
    Ok(chunk_samples(env, &d.episodes, config.horizon)?)
}

/// Pools (predicted score, true error) over every proposal of every held-out
/// state, in normalized units, and reports Spearman's rho. `None` for
/// models without scores.
pub fn score_calibration(bundle: &PolicyBundle, samples: &[ChunkSample]) -> Result<Option<CalibrationRecord>> {
    let PolicyModel::Choice(model) = &bundle.model else {
        return Ok(None);
    };
    let mut scores = Vec::new();
    let mut errors = Vec::new();
    for c in samples {
        let set = model.propose(&bundle.stats.normalize_obs(&c.sample.obs)?)?;
        let target = bundle.stats.normalize_chunk(&c.sample.target)?;
        scores.extend_from_slice(set.scores());
        errors.extend(per_proposal_loss(&set, &target)?);
    }
    let rho = spearman(&scores, &errors)
        .ok_or_else(|| HarnessError::Numerical("score calibration is undefined for constant scores or errors".into()))?;
    Ok(Some(CalibrationRecord {
        pairs: scores.len(),
        spearman: rho,
    }))
}

/// Wall-clock time of `calls` inference calls, cycling through `observations`.
pub fn bench_latency(bundle: &PolicyBundle, observations: &[Vec<f64>], calls: usize, seed: u64) -> Result<LatencyStats> {
    if observations.is_empty() {
        return Err(HarnessError::Data("no observations to benchmark with".into()));
    }
    let mut rng = SeededRng::new(seed);
    let mut times = Vec::with_capacity(calls);
    for i in 0..calls {
        let obs = &observations[i % observations.len()];
        let t0 = Instant::now();
        let d = bundle.decide(obs, SelectionStrategy::Score, &mut rng)?;
        times.push(t0.elapsed().as_secs_f64() * 1e6);
        std::hint::black_box(d);
    }
    latency_stats(&times).ok_or_else(|| HarnessError::Config("`calls` must be positive".into()))
}
