//! Closed-loop evaluation of policies.

use choice_core::baselines::SelectionStrategy;
use choice_core::bundle::PolicyBundle;
use choice_core::numerics::SeededRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{EnvState, Environment, Expert};
use crate::error::{EnvError, Result};

/// The action to execute now and, for choice models, which head produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStep {
    pub action: Vec<f64>,
    pub head: Option<usize>,
}

pub trait Policy {
    /// Called once at the start of every episode.
    fn reset(&mut self, _rng: &mut SeededRng) -> Result<()> {
        Ok(())
    }

    fn obs_dim(&self) -> Option<usize> {
        None
    }

    fn act(&mut self, obs: &[f64], state: &EnvState, rng: &mut SeededRng) -> Result<PolicyStep>;
}

/// Noise-free demonstrator with a uniformly drawn mode per episode.
pub struct ScriptedPolicy<'a> {
    env: &'a dyn Environment,
    expert: Option<Box<dyn Expert>>,
}

impl<'a> ScriptedPolicy<'a> {
    pub fn new(env: &'a dyn Environment) -> Self {
        Self { env, expert: None }
    }
}

impl Policy for ScriptedPolicy<'_> {
    fn reset(&mut self, rng: &mut SeededRng) -> Result<()> {
        let mode = rng.index(self.env.num_modes());
        self.expert = Some(self.env.expert(mode, 0.0)?);
        Ok(())
    }

    fn act(&mut self, _obs: &[f64], state: &EnvState, rng: &mut SeededRng) -> Result<PolicyStep> {
        let expert = self
            .expert
            .as_mut()
            .ok_or_else(|| EnvError::InvalidInput("scripted policy used before reset".into()))?;
        Ok(PolicyStep {
            action: expert.act(state, rng),
            head: None,
        })
    }
}

/// Always outputs the idle action.
pub struct ZeroPolicy {
    pub action_dim: usize,
}

impl Policy for ZeroPolicy {
    fn act(&mut self, _obs: &[f64], _state: &EnvState, _rng: &mut SeededRng) -> Result<PolicyStep> {
        Ok(PolicyStep {
            action: vec![0.0; self.action_dim],
            head: None,
        })
    }
}

/// A trained model; executes the first action of each chunk it selects.
pub struct LearnedPolicy<'a> {
    pub bundle: &'a PolicyBundle,
    pub strategy: SelectionStrategy,
}

impl Policy for LearnedPolicy<'_> {
    fn obs_dim(&self) -> Option<usize> {
        Some(self.bundle.model.obs_dim())
    }

    fn act(&mut self, obs: &[f64], _state: &EnvState, rng: &mut SeededRng) -> Result<PolicyStep> {
        let d = self.bundle.decide(obs, self.strategy, rng)?;
        Ok(PolicyStep {
            action: d.chunk.first_action().to_vec(),
            head: d.head,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStep {
    pub t: usize,
    pub phase: usize,
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub head: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub episode: usize,
    pub success: bool,
    /// Why the episode failed, if it did.
    pub reason: Option<String>,
    /// Completion flag per phase.
    pub stages: Vec<bool>,
    pub steps: Vec<RolloutStep>,
    pub final_state: EnvState,
}

impl RolloutResult {
    pub fn heads(&self) -> Vec<Option<usize>> {
        self.steps.iter().map(|s| s.head).collect()
    }
}

/// Runs one episode. The policy acts on the current observation; the phase
/// recorded for each step is the phase of the state the action was chosen in.
pub fn rollout(
    env: &dyn Environment,
    policy: &mut dyn Policy,
    rng: &mut SeededRng,
    max_steps: usize,
    episode: usize,
) -> Result<RolloutResult> {
    if let Some(d) = policy.obs_dim() {
        if d != env.obs_dim() {
            return Err(EnvError::InvalidInput(format!(
                "policy expects {d} observation values, task provides {}",
                env.obs_dim()
            )));
        }
    }
    policy.reset(rng)?;
    let mut state = env.initial_state(rng);
    let mut steps = Vec::new();
    while !state.is_terminal() && steps.len() < max_steps {
        let obs = env.observe(&state);
        let out = policy.act(&obs, &state, rng)?;
        steps.push(RolloutStep {
            t: steps.len(),
            phase: state.phase,
            obs,
            action: out.action.clone(),
            head: out.head,
        });
        state = env.step(&state, &out.action)?;
    }
    let reason = if state.success {
        None
    } else {
        Some(
            state
                .failure
                .clone()
                .unwrap_or_else(|| format!("step budget of {max_steps} exhausted")),
        )
    };
    Ok(RolloutResult {
        episode,
        success: state.success,
        reason,
        stages: state.stage_flags(env.phase_names().len()),
        steps,
        final_state: state,
    })
}

/// Runs `episodes` rollouts in parallel. Episode `i` uses stream `i` of `seed`
/// and a fresh policy from `make_policy`, so results do not depend on
/// scheduling.
pub fn evaluate<'p, F>(
    env: &dyn Environment,
    make_policy: F,
    episodes: usize,
    seed: u64,
    max_steps: usize,
) -> Result<Vec<RolloutResult>>
where
    F: Fn() -> Box<dyn Policy + 'p> + Sync,
{
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = SeededRng::new(seed).split(i as u64);
            let mut policy = make_policy();
            rollout(env, policy.as_mut(), &mut rng, max_steps, i)
        })
        .collect()
}

pub fn success_count(results: &[RolloutResult]) -> usize {
    results.iter().filter(|r| r.success).count()
}
