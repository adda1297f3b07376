//! Iterative-denoising chunk generator (epsilon prediction, linear variance schedule).
//!
//! The noise network sees `[feature, noisy chunk, step embedding]` and predicts
//! the Gaussian noise that was mixed into the chunk. Sampling runs the
//! ancestral reverse chain for every step of the schedule.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numerics::{Activation, Adam, Mlp, MlpGrads, SeededRng};
use crate::policy::{build_encoder, check_samples, run_minibatches};
use crate::policy::{ActionChunk, FitConfig, FitLog, Sample, StepLoss};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub horizon: usize,
    pub action_dim: usize,
    pub obs_dim: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub time_embed_dim: usize,
}

impl DenoiserConfig {
    pub fn new(obs_dim: usize, action_dim: usize) -> Self {
        Self {
            horizon: 8,
            action_dim,
            obs_dim,
            feature_dim: 64,
            hidden_dim: 64,
            steps: 50,
            beta_start: 1e-4,
            beta_end: 0.3,
            time_embed_dim: 8,
        }
    }

    pub fn chunk_len(&self) -> usize {
        self.horizon * self.action_dim
    }

    fn noise_net_input(&self) -> usize {
        self.feature_dim + self.chunk_len() + self.time_embed_dim
    }
}

/// Per-step variances and their cumulative products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Linearly spaced variances; a single-step schedule uses `beta_end`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidInput("noise schedule needs at least one step".into()));
        }
        if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::InvalidInput(format!(
                "variances must satisfy 0 < start <= end < 1, got {beta_start}..{beta_end}"
            )));
        }
        let betas: Vec<f64> = if steps == 1 {
            vec![beta_end]
        } else {
            (0..steps)
                .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
                .collect()
        };
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || betas.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::InvalidInput("every variance must lie in (0, 1)".into()));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("variances must be non-decreasing".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

fn step_embedding(step: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let freq = (-(100f64.ln()) * i as f64 / half.max(1) as f64).exp();
        out.push((step as f64 * freq).sin());
        out.push((step as f64 * freq).cos());
    }
    out.resize(dim, 0.0);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserModel {
    config: DenoiserConfig,
    encoder: Mlp,
    noise_net: Mlp,
    schedule: NoiseSchedule,
}

impl DenoiserModel {
    pub fn new(config: DenoiserConfig, rng: &mut SeededRng) -> Result<Self> {
        let schedule = NoiseSchedule::linear(config.steps, config.beta_start, config.beta_end)?;
        let encoder = build_encoder(config.obs_dim, config.hidden_dim, config.feature_dim, rng)?;
        let noise_net = Mlp::new(
            &[config.noise_net_input(), config.hidden_dim, config.hidden_dim, config.chunk_len()],
            Activation::Identity,
            rng,
        )?;
        Ok(Self {
            config,
            encoder,
            noise_net,
            schedule,
        })
    }

    /// Builds a model from explicit parts. `noise_net` must take
    /// `feature_dim + horizon * action_dim + time_embed_dim` inputs.
    pub fn from_parts(config: DenoiserConfig, encoder: Mlp, noise_net: Mlp, schedule: NoiseSchedule) -> Result<Self> {
        if encoder.input_dim() != config.obs_dim || encoder.output_dim() != config.feature_dim {
            return Err(shape_err(
                "denoiser encoder",
                format!("{} -> {}", config.obs_dim, config.feature_dim),
                format!("{} -> {}", encoder.input_dim(), encoder.output_dim()),
            ));
        }
        if noise_net.input_dim() != config.noise_net_input() || noise_net.output_dim() != config.chunk_len() {
            return Err(shape_err(
                "denoiser noise net",
                format!("{} -> {}", config.noise_net_input(), config.chunk_len()),
                format!("{} -> {}", noise_net.input_dim(), noise_net.output_dim()),
            ));
        }
        if schedule.len() != config.steps {
            return Err(shape_err("denoiser schedule", config.steps, schedule.len()));
        }
        Ok(Self {
            config,
            encoder,
            noise_net,
            schedule,
        })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn noise_net(&self) -> &Mlp {
        &self.noise_net
    }

    fn net_input(&self, feature: &[f64], noisy: &[f64], step: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.config.noise_net_input());
        x.extend_from_slice(feature);
        x.extend_from_slice(noisy);
        x.extend(step_embedding(step, self.config.time_embed_dim));
        x
    }

    /// Runs the full reverse chain: one encoder pass, then one noise-net pass per step.
    pub fn sample(&self, obs: &[f64], rng: &mut SeededRng) -> Result<ActionChunk> {
        if obs.len() != self.config.obs_dim {
            return Err(shape_err("denoiser observation", self.config.obs_dim, obs.len()));
        }
        let feature = self.encoder.forward_vec(obs)?;
        let n = self.config.chunk_len();
        let mut x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        for t in (0..self.schedule.len()).rev() {
            let eps = self.noise_net.forward_vec(&self.net_input(&feature, &x, t))?;
            let beta = self.schedule.betas[t];
            let coef = beta / (1.0 - self.schedule.alpha_bars[t]).sqrt();
            let inv_sqrt_alpha = 1.0 / self.schedule.alphas[t].sqrt();
            for (xi, ei) in x.iter_mut().zip(&eps) {
                *xi = inv_sqrt_alpha * (*xi - coef * ei);
            }
            if t > 0 {
                let sigma = beta.sqrt();
                x.iter_mut().for_each(|xi| *xi += sigma * rng.normal());
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("denoiser sample".into()));
        }
        ActionChunk::new(self.config.horizon, self.config.action_dim, x)
    }

    fn accumulate(
        &self,
        sample: &Sample,
        weight: f64,
        rng: &mut SeededRng,
        enc_grads: &mut MlpGrads,
        net_grads: &mut MlpGrads,
    ) -> Result<f64> {
        let n = self.config.chunk_len();
        let t = rng.index(self.schedule.len());
        let ab = self.schedule.alpha_bars[t];
        let eps: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let noisy: Vec<f64> = sample
            .target
            .values()
            .iter()
            .zip(&eps)
            .map(|(x0, e)| ab.sqrt() * x0 + (1.0 - ab).sqrt() * e)
            .collect();
        let enc = self.encoder.forward_cached(&sample.obs)?;
        let net = self.noise_net.forward_cached(&self.net_input(enc.output(), &noisy, t))?;
        let mut loss = 0.0;
        let out_grad: Vec<f64> = net
            .output()
            .iter()
            .zip(&eps)
            .map(|(p, e)| {
                loss += (p - e) * (p - e) / n as f64;
                weight * 2.0 * (p - e) / n as f64
            })
            .collect();
        let in_grad = self.noise_net.backward_cached(&net, &out_grad, net_grads)?;
        self.encoder
            .backward_cached(&enc, &in_grad[..self.config.feature_dim], enc_grads)?;
        Ok(loss)
    }

    /// Noise-prediction regression on already-normalized samples.
    pub fn fit(&mut self, samples: &[Sample], cfg: &FitConfig) -> Result<FitLog> {
        check_samples(samples, self.config.obs_dim, self.config.horizon, self.config.action_dim)?;
        let mut adam = Adam::new(cfg.adam);
        let mut enc_grads = self.encoder.zero_grads();
        let mut net_grads = self.noise_net.zero_grads();
        let mut noise_rng = SeededRng::new(cfg.seed).split(0xd1ff);
        run_minibatches(samples.len(), cfg, |batch| {
            enc_grads.clear();
            net_grads.clear();
            let w = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                loss += w * self.accumulate(&samples[i], w, &mut noise_rng, &mut enc_grads, &mut net_grads)?;
            }
            let mut slots = self.encoder.slots(&enc_grads, "encoder");
            slots.extend(self.noise_net.slots(&net_grads, "noise_net"));
            adam.step(slots)?;
            Ok(StepLoss {
                total: loss,
                action: loss,
                score: 0.0,
            })
        })
    }
}
