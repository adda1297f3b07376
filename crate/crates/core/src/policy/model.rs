//! K-proposal action head with a learned error predictor.
//!
//! A shared encoder maps the observation to a feature vector. The proposal
//! head emits `K * T * A` values, read as K chunks; the score head emits K
//! predicted per-proposal MSEs. Training moves only the proposal closest to
//! the ground truth and regresses every score onto its proposal's actual
//! error. Inference returns the proposal with the lowest predicted error.

use serde::{Deserialize, Serialize};

use super::chunk::{ActionChunk, ProposalSet};
use super::loss::{per_proposal_loss, score_loss, select_winner};
use super::train::{check_samples, run_minibatches, FitConfig, FitLog, Sample, StepLoss};
use crate::error::{shape_err, Error, Result};
use crate::numerics::{Activation, Adam, Mlp, MlpGrads, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceConfig {
    pub num_proposals: usize,
    pub horizon: usize,
    pub action_dim: usize,
    pub obs_dim: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    /// Whether the score-regression gradient also updates the shared encoder.
    pub score_grad_to_encoder: bool,
}

impl ChoiceConfig {
    pub fn new(obs_dim: usize, action_dim: usize) -> Self {
        Self {
            num_proposals: 5,
            horizon: 8,
            action_dim,
            obs_dim,
            feature_dim: 64,
            hidden_dim: 64,
            score_grad_to_encoder: true,
        }
    }

    pub fn chunk_len(&self) -> usize {
        self.horizon * self.action_dim
    }

    fn validate(&self) -> Result<()> {
        let dims = [
            self.num_proposals,
            self.horizon,
            self.action_dim,
            self.obs_dim,
            self.feature_dim,
            self.hidden_dim,
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidInput(format!("choice config has a zero dimension: {self:?}")));
        }
        Ok(())
    }
}

/// Encoder shared by every policy kind: ReLU hidden layers, tanh feature output.
pub(crate) fn build_encoder(obs_dim: usize, hidden: usize, feature: usize, rng: &mut SeededRng) -> Result<Mlp> {
    Mlp::new(&[obs_dim, hidden, hidden, feature], Activation::Tanh, rng)
}

/// Two-layer head with a linear output.
pub(crate) fn build_head(feature: usize, hidden: usize, out: usize, rng: &mut SeededRng) -> Result<Mlp> {
    Mlp::new(&[feature, hidden, out], Activation::Identity, rng)
}

/// Loss terms of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub action: f64,
    pub score: f64,
    pub winner: usize,
    pub per_proposal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceGrads {
    pub encoder: MlpGrads,
    pub proposal_head: MlpGrads,
    pub score_head: MlpGrads,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoicePolicyModel {
    config: ChoiceConfig,
    encoder: Mlp,
    proposal_head: Mlp,
    score_head: Mlp,
}

impl ChoicePolicyModel {
    /// Initializes encoder, proposal head and score head in that order from `rng`.
    pub fn new(config: ChoiceConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let encoder = build_encoder(config.obs_dim, config.hidden_dim, config.feature_dim, rng)?;
        let proposal_head = build_head(
            config.feature_dim,
            config.hidden_dim,
            config.num_proposals * config.chunk_len(),
            rng,
        )?;
        let score_head = build_head(config.feature_dim, config.hidden_dim, config.num_proposals, rng)?;
        Ok(Self {
            config,
            encoder,
            proposal_head,
            score_head,
        })
    }

    /// Assembles a model from explicit networks, checking them against `config`.
    pub fn from_parts(config: ChoiceConfig, encoder: Mlp, proposal_head: Mlp, score_head: Mlp) -> Result<Self> {
        config.validate()?;
        let checks = [
            ("encoder input", encoder.input_dim(), config.obs_dim),
            ("encoder output", encoder.output_dim(), config.feature_dim),
            ("proposal head input", proposal_head.input_dim(), config.feature_dim),
            (
                "proposal head output",
                proposal_head.output_dim(),
                config.num_proposals * config.chunk_len(),
            ),
            ("score head input", score_head.input_dim(), config.feature_dim),
            ("score head output", score_head.output_dim(), config.num_proposals),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(Error::ShapeMismatch {
                    context: "ChoicePolicyModel::from_parts",
                    expected: format!("{what} = {want}"),
                    actual: got.to_string(),
                });
            }
        }
        Ok(Self {
            config,
            encoder,
            proposal_head,
            score_head,
        })
    }

    pub fn config(&self) -> &ChoiceConfig {
        &self.config
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn proposal_head(&self) -> &Mlp {
        &self.proposal_head
    }

    pub fn score_head(&self) -> &Mlp {
        &self.score_head
    }

    pub fn encoder_mut(&mut self) -> &mut Mlp {
        &mut self.encoder
    }

    pub fn proposal_head_mut(&mut self) -> &mut Mlp {
        &mut self.proposal_head
    }

    pub fn score_head_mut(&mut self) -> &mut Mlp {
        &mut self.score_head
    }

    pub fn set_score_grad_to_encoder(&mut self, on: bool) {
        self.config.score_grad_to_encoder = on;
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.config.obs_dim {
            return Err(shape_err("choice policy observation", self.config.obs_dim, obs.len()));
        }
        Ok(())
    }

    /// One encoder pass, one proposal-head pass and one score-head pass.
    pub fn propose(&self, obs: &[f64]) -> Result<ProposalSet> {
        self.check_obs(obs)?;
        let feature = self.encoder.forward_vec(obs)?;
        let flat = self.proposal_head.forward_vec(&feature)?;
        let scores = self.score_head.forward_vec(&feature)?;
        ProposalSet::from_flat(&flat, scores, self.config.horizon, self.config.action_dim)
    }

    /// The proposal with the lowest predicted error, with its index.
    pub fn infer_indexed(&self, obs: &[f64]) -> Result<(usize, ActionChunk)> {
        let set = self.propose(obs)?;
        let k = select_winner(set.scores())?;
        Ok((k, set.proposal(k).clone()))
    }

    pub fn infer(&self, obs: &[f64]) -> Result<ActionChunk> {
        self.infer_indexed(obs).map(|(_, c)| c)
    }

    /// Loss terms for one (observation, ground truth) pair, without gradients.
    pub fn training_loss(&self, obs: &[f64], target: &ActionChunk) -> Result<LossBreakdown> {
        let set = self.propose(obs)?;
        breakdown(&set, target)
    }

    pub fn zero_grads(&self) -> ChoiceGrads {
        ChoiceGrads {
            encoder: self.encoder.zero_grads(),
            proposal_head: self.proposal_head.zero_grads(),
            score_head: self.score_head.zero_grads(),
        }
    }

    /// Adds `weight * d(loss)/d(params)` for one sample into `grads`.
    ///
    /// Only the winning proposal's slice of the head output receives an
    /// action gradient. Per-proposal losses enter the score term as constants.
    pub fn accumulate_grads(
        &self,
        obs: &[f64],
        target: &ActionChunk,
        weight: f64,
        grads: &mut ChoiceGrads,
    ) -> Result<LossBreakdown> {
        self.check_obs(obs)?;
        let cfg = &self.config;
        if target.horizon() != cfg.horizon || target.action_dim() != cfg.action_dim {
            return Err(shape_err(
                "choice policy target",
                format!("{}x{}", cfg.horizon, cfg.action_dim),
                format!("{}x{}", target.horizon(), target.action_dim()),
            ));
        }
        let enc = self.encoder.forward_cached(obs)?;
        let prop = self.proposal_head.forward_cached(enc.output())?;
        let score = self.score_head.forward_cached(enc.output())?;
        let set = ProposalSet::from_flat(prop.output(), score.output().to_vec(), cfg.horizon, cfg.action_dim)?;
        let loss = breakdown(&set, target)?;

        let n = cfg.chunk_len();
        let mut prop_grad = vec![0.0; cfg.num_proposals * n];
        let winner = &prop.output()[loss.winner * n..(loss.winner + 1) * n];
        for (j, (p, g)) in winner.iter().zip(target.values()).enumerate() {
            prop_grad[loss.winner * n + j] = weight * 2.0 * (p - g) / n as f64;
        }
        let k = cfg.num_proposals as f64;
        let score_grad: Vec<f64> = set
            .scores()
            .iter()
            .zip(&loss.per_proposal)
            .map(|(s, l)| weight * 2.0 * (s - l) / k)
            .collect();

        let mut feature_grad = self
            .proposal_head
            .backward_cached(&prop, &prop_grad, &mut grads.proposal_head)?;
        let score_feature_grad = self
            .score_head
            .backward_cached(&score, &score_grad, &mut grads.score_head)?;
        if cfg.score_grad_to_encoder {
            feature_grad
                .iter_mut()
                .zip(&score_feature_grad)
                .for_each(|(f, s)| *f += s);
        }
        self.encoder.backward_cached(&enc, &feature_grad, &mut grads.encoder)?;
        Ok(loss)
    }

    /// Gradients of the batch-mean loss over `samples`.
    pub fn batch_grads(&self, samples: &[&Sample]) -> Result<(StepLoss, ChoiceGrads)> {
        let mut grads = self.zero_grads();
        let loss = self.batch_into(samples, &mut grads)?;
        Ok((loss, grads))
    }

    fn batch_into(&self, samples: &[&Sample], grads: &mut ChoiceGrads) -> Result<StepLoss> {
        let w = 1.0 / samples.len() as f64;
        let mut acc = StepLoss::default();
        for s in samples {
            let l = self.accumulate_grads(&s.obs, &s.target, w, grads)?;
            acc.total += w * l.total;
            acc.action += w * l.action;
            acc.score += w * l.score;
        }
        Ok(acc)
    }

    /// Minibatch training on already-normalized samples.
    pub fn fit(&mut self, samples: &[Sample], cfg: &FitConfig) -> Result<FitLog> {
        check_samples(samples, self.config.obs_dim, self.config.horizon, self.config.action_dim)?;
        let mut adam = Adam::new(cfg.adam);
        let mut grads = self.zero_grads();
        run_minibatches(samples.len(), cfg, |batch| {
            grads.encoder.clear();
            grads.proposal_head.clear();
            grads.score_head.clear();
            let refs: Vec<&Sample> = batch.iter().map(|&i| &samples[i]).collect();
            let loss = self.batch_into(&refs, &mut grads)?;
            let mut slots = self.encoder.slots(&grads.encoder, "encoder");
            slots.extend(self.proposal_head.slots(&grads.proposal_head, "proposal_head"));
            slots.extend(self.score_head.slots(&grads.score_head, "score_head"));
            adam.step(slots)?;
            Ok(loss)
        })
    }
}

fn breakdown(set: &ProposalSet, target: &ActionChunk) -> Result<LossBreakdown> {
    let per_proposal = per_proposal_loss(set, target)?;
    let winner = select_winner(&per_proposal)?;
    let action = per_proposal[winner];
    let score = score_loss(set.scores(), &per_proposal)?;
    let total = action + score;
    if !total.is_finite() {
        return Err(Error::NonFinite("choice policy loss".into()));
    }
    Ok(LossBreakdown {
        total,
        action,
        score,
        winner,
        per_proposal,
    })
}
