use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numerics::{Adam, Mlp, MlpGrads, SeededRng};
use crate::policy::{build_encoder, build_head, check_samples, chunk_mse, run_minibatches};
use crate::policy::{ActionChunk, FitConfig, FitLog, Sample, StepLoss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BcConfig {
    pub horizon: usize,
    pub action_dim: usize,
    pub obs_dim: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
}

impl BcConfig {
    pub fn chunk_len(&self) -> usize {
        self.horizon * self.action_dim
    }
}

/// Plain behavior cloning: one chunk regressed with MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcModel {
    config: BcConfig,
    encoder: Mlp,
    head: Mlp,
}

impl BcModel {
    /// Initializes the encoder, then the action head, from `rng`.
    ///
    /// This is the same draw order a choice policy uses for its encoder and
    /// proposal head, so a one-proposal choice model built from the same seed
    /// starts from identical weights.
    pub fn new(config: BcConfig, rng: &mut SeededRng) -> Result<Self> {
        if [config.horizon, config.action_dim, config.obs_dim, config.feature_dim, config.hidden_dim].contains(&0) {
            return Err(Error::InvalidInput(format!("bc config has a zero dimension: {config:?}")));
        }
        let encoder = build_encoder(config.obs_dim, config.hidden_dim, config.feature_dim, rng)?;
        let head = build_head(config.feature_dim, config.hidden_dim, config.chunk_len(), rng)?;
        Ok(Self { config, encoder, head })
    }

    pub fn config(&self) -> &BcConfig {
        &self.config
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn head(&self) -> &Mlp {
        &self.head
    }

    pub fn infer(&self, obs: &[f64]) -> Result<ActionChunk> {
        if obs.len() != self.config.obs_dim {
            return Err(shape_err("bc observation", self.config.obs_dim, obs.len()));
        }
        let feature = self.encoder.forward_vec(obs)?;
        let out = self.head.forward_vec(&feature)?;
        ActionChunk::new(self.config.horizon, self.config.action_dim, out)
    }

    pub fn loss(&self, obs: &[f64], target: &ActionChunk) -> Result<f64> {
        chunk_mse(&self.infer(obs)?, target)
    }

    fn accumulate(
        &self,
        sample: &Sample,
        weight: f64,
        enc_grads: &mut MlpGrads,
        head_grads: &mut MlpGrads,
    ) -> Result<f64> {
        let enc = self.encoder.forward_cached(&sample.obs)?;
        let head = self.head.forward_cached(enc.output())?;
        let n = self.config.chunk_len();
        let pred = ActionChunk::new(self.config.horizon, self.config.action_dim, head.output().to_vec())?;
        let loss = chunk_mse(&pred, &sample.target)?;
        let out_grad: Vec<f64> = head
            .output()
            .iter()
            .zip(sample.target.values())
            .map(|(p, g)| weight * 2.0 * (p - g) / n as f64)
            .collect();
        let feature_grad = self.head.backward_cached(&head, &out_grad, head_grads)?;
        self.encoder.backward_cached(&enc, &feature_grad, enc_grads)?;
        Ok(loss)
    }

    /// Minibatch MSE regression on already-normalized samples.
    pub fn fit(&mut self, samples: &[Sample], cfg: &FitConfig) -> Result<FitLog> {
        check_samples(samples, self.config.obs_dim, self.config.horizon, self.config.action_dim)?;
        let mut adam = Adam::new(cfg.adam);
        let mut enc_grads = self.encoder.zero_grads();
        let mut head_grads = self.head.zero_grads();
        run_minibatches(samples.len(), cfg, |batch| {
            enc_grads.clear();
            head_grads.clear();
            let w = 1.0 / batch.len() as f64;
            let mut action = 0.0;
            for &i in batch {
                action += w * self.accumulate(&samples[i], w, &mut enc_grads, &mut head_grads)?;
            }
            let mut slots = self.encoder.slots(&enc_grads, "encoder");
            slots.extend(self.head.slots(&head_grads, "action_head"));
            adam.step(slots)?;
            Ok(StepLoss {
                total: action,
                action,
                score: 0.0,
            })
        })
    }
}
