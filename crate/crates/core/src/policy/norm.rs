use serde::{Deserialize, Serialize};

use super::chunk::ActionChunk;
use super::train::Sample;
use crate::error::{shape_err, Error, Result};

pub const STD_FLOOR: f64 = 1e-6;

/// Per-dimension z-score statistics for observations and actions.
///
/// Action statistics are shared across the steps of a chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub obs_mean: Vec<f64>,
    pub obs_std: Vec<f64>,
    pub action_mean: Vec<f64>,
    pub action_std: Vec<f64>,
}

fn mean_std(rows: impl Iterator<Item = impl AsRef<[f64]>>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut n = 0usize;
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    for row in rows {
        n += 1;
        for (i, v) in row.as_ref().iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    let n = n.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| (s / n - m * m).max(0.0).sqrt().max(STD_FLOOR))
        .collect();
    (mean, std)
}

impl NormalizationStats {
    pub fn identity(obs_dim: usize, action_dim: usize) -> Self {
        Self {
            obs_mean: vec![0.0; obs_dim],
            obs_std: vec![1.0; obs_dim],
            action_mean: vec![0.0; action_dim],
            action_std: vec![1.0; action_dim],
        }
    }

    /// Statistics over raw training samples.
    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let obs_dim = first.obs.len();
        let action_dim = first.target.action_dim();
        for s in samples {
            if s.obs.len() != obs_dim || s.target.action_dim() != action_dim {
                return Err(shape_err(
                    "NormalizationStats::from_samples",
                    format!("obs {obs_dim}, action {action_dim}"),
                    format!("obs {}, action {}", s.obs.len(), s.target.action_dim()),
                ));
            }
        }
        let (obs_mean, obs_std) = mean_std(samples.iter().map(|s| s.obs.as_slice()), obs_dim);
        let (action_mean, action_std) = mean_std(
            samples
                .iter()
                .flat_map(|s| (0..s.target.horizon()).map(move |t| s.target.step(t))),
            action_dim,
        );
        Ok(Self {
            obs_mean,
            obs_std,
            action_mean,
            action_std,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_mean.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_mean.len()
    }

    pub fn normalize_obs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim() {
            return Err(shape_err("normalize_obs", self.obs_dim(), obs.len()));
        }
        Ok(obs
            .iter()
            .zip(self.obs_mean.iter().zip(&self.obs_std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn normalize_chunk(&self, chunk: &ActionChunk) -> Result<ActionChunk> {
        self.map_chunk(chunk, |x, m, s| (x - m) / s)
    }

    pub fn denormalize_chunk(&self, chunk: &ActionChunk) -> Result<ActionChunk> {
        self.map_chunk(chunk, |x, m, s| x * s + m)
    }

    fn map_chunk(&self, chunk: &ActionChunk, f: impl Fn(f64, f64, f64) -> f64) -> Result<ActionChunk> {
        let a = self.action_dim();
        if chunk.action_dim() != a {
            return Err(shape_err("normalization action dim", a, chunk.action_dim()));
        }
        let values = chunk
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, self.action_mean[i % a], self.action_std[i % a]))
            .collect();
        ActionChunk::new(chunk.horizon(), a, values)
    }

    pub fn normalize_samples(&self, samples: &[Sample]) -> Result<Vec<Sample>> {
        samples
            .iter()
            .map(|s| {
                Ok(Sample {
                    obs: self.normalize_obs(&s.obs)?,
                    target: self.normalize_chunk(&s.target)?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(obs: Vec<f64>, rows: &[Vec<f64>]) -> Sample {
        Sample {
            obs,
            target: ActionChunk::from_rows(rows).unwrap(),
        }
    }

    #[test]
    fn zero_mean_unit_std_after_normalizing() {
        let data = vec![
            sample(vec![1.0, 5.0], &[vec![0.0], vec![2.0]]),
            sample(vec![3.0, 5.0], &[vec![4.0], vec![6.0]]),
        ];
        let stats = NormalizationStats::from_samples(&data).unwrap();
        assert_eq!(stats.obs_mean, vec![2.0, 5.0]);
        assert_eq!(stats.obs_std[0], 1.0);
        // constant dimension is floored instead of dividing by zero
        assert_eq!(stats.obs_std[1], STD_FLOOR);
        assert_eq!(stats.action_mean, vec![3.0]);
        let norm = stats.normalize_samples(&data).unwrap();
        assert_eq!(norm[0].obs, vec![-1.0, 0.0]);
        let back = stats.denormalize_chunk(&norm[1].target).unwrap();
        for (a, b) in back.values().iter().zip(data[1].target.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_and_ragged_rejected() {
        assert!(matches!(NormalizationStats::from_samples(&[]), Err(Error::EmptyDataset)));
        let data = vec![sample(vec![1.0], &[vec![0.0]]), sample(vec![1.0, 2.0], &[vec![0.0]])];
        assert!(NormalizationStats::from_samples(&data).is_err());
    }
}
