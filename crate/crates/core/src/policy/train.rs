use serde::{Deserialize, Serialize};

use super::chunk::ActionChunk;
use crate::error::{shape_err, Error, Result};
use crate::numerics::{AdamConfig, SeededRng};

/// One supervised pair: observation features and the ground-truth chunk that follows.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub target: ActionChunk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// Batch-mean losses of one optimizer step (or the mean over an epoch).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLoss {
    pub total: f64,
    pub action: f64,
    pub score: f64,
}

impl StepLoss {
    fn add_scaled(&mut self, other: &StepLoss, w: f64) {
        self.total += w * other.total;
        self.action += w * other.action;
        self.score += w * other.score;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitLog {
    pub steps: Vec<StepLoss>,
    pub epochs: Vec<StepLoss>,
}

pub(crate) fn check_samples(samples: &[Sample], obs_dim: usize, horizon: usize, action_dim: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for s in samples {
        if s.obs.len() != obs_dim {
            return Err(shape_err("training sample obs", obs_dim, s.obs.len()));
        }
        if s.target.horizon() != horizon || s.target.action_dim() != action_dim {
            return Err(shape_err(
                "training sample target",
                format!("{horizon}x{action_dim}"),
                format!("{}x{}", s.target.horizon(), s.target.action_dim()),
            ));
        }
    }
    Ok(())
}

/// Shuffled minibatch schedule shared by every trainer, so that two models
/// fitted with the same seed see the same batches in the same order.
pub(crate) fn run_minibatches(
    n: usize,
    cfg: &FitConfig,
    mut step: impl FnMut(&[usize]) -> Result<StepLoss>,
) -> Result<FitLog> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be positive".into()));
    }
    let mut rng = SeededRng::new(cfg.seed).split(0x5eed_ba7c);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = FitLog::default();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch = StepLoss::default();
        let batches = order.chunks(cfg.batch_size).count();
        for batch in order.chunks(cfg.batch_size) {
            let loss = step(batch)?;
            if !(loss.total.is_finite() && loss.action.is_finite() && loss.score.is_finite()) {
                return Err(Error::NonFinite("training loss".into()));
            }
            epoch.add_scaled(&loss, 1.0 / batches as f64);
            log.steps.push(loss);
        }
        log.epochs.push(epoch);
    }
    Ok(log)
}
