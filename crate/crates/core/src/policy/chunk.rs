use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// A `horizon x action_dim` block of future actions, row-major by time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    horizon: usize,
    action_dim: usize,
    values: Vec<f64>,
}

impl ActionChunk {
    pub fn new(horizon: usize, action_dim: usize, values: Vec<f64>) -> Result<Self> {
        if horizon == 0 || action_dim == 0 {
            return Err(Error::InvalidInput(format!(
                "chunk needs horizon >= 1 and action_dim >= 1, got {horizon}x{action_dim}"
            )));
        }
        if values.len() != horizon * action_dim {
            return Err(shape_err("ActionChunk::new", horizon * action_dim, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ActionChunk::new".into()));
        }
        Ok(Self {
            horizon,
            action_dim,
            values,
        })
    }

    pub fn zeros(horizon: usize, action_dim: usize) -> Self {
        Self {
            horizon,
            action_dim,
            values: vec![0.0; horizon * action_dim],
        }
    }

    /// Stacks per-step action rows into a chunk.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let action_dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != action_dim) {
            return Err(shape_err("ActionChunk::from_rows", action_dim, bad.len()));
        }
        Self::new(rows.len(), action_dim, rows.concat())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, t: usize, a: usize) -> f64 {
        self.values[t * self.action_dim + a]
    }

    /// Action at step `t`.
    pub fn step(&self, t: usize) -> &[f64] {
        &self.values[t * self.action_dim..(t + 1) * self.action_dim]
    }

    pub fn first_action(&self) -> &[f64] {
        self.step(0)
    }

    pub fn same_shape(&self, other: &ActionChunk) -> bool {
        self.horizon == other.horizon && self.action_dim == other.action_dim
    }
}

/// K candidate chunks together with their predicted errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSet {
    proposals: Vec<ActionChunk>,
    scores: Vec<f64>,
}

impl ProposalSet {
    pub fn new(proposals: Vec<ActionChunk>, scores: Vec<f64>) -> Result<Self> {
        if proposals.is_empty() {
            return Err(Error::InvalidInput("a proposal set needs K >= 1".into()));
        }
        if proposals.len() != scores.len() {
            return Err(shape_err("ProposalSet::new", proposals.len(), scores.len()));
        }
        if let Some(bad) = proposals.iter().find(|p| !p.same_shape(&proposals[0])) {
            return Err(shape_err(
                "ProposalSet::new",
                format!("{}x{}", proposals[0].horizon(), proposals[0].action_dim()),
                format!("{}x{}", bad.horizon(), bad.action_dim()),
            ));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("ProposalSet scores".into()));
        }
        Ok(Self { proposals, scores })
    }

    /// Splits a flat head output laid out as `[K][T][A]`.
    pub fn from_flat(flat: &[f64], scores: Vec<f64>, horizon: usize, action_dim: usize) -> Result<Self> {
        let chunk = horizon * action_dim;
        if chunk == 0 || flat.len() != scores.len() * chunk {
            return Err(shape_err("ProposalSet::from_flat", scores.len() * chunk, flat.len()));
        }
        let proposals = flat
            .chunks(chunk)
            .map(|c| ActionChunk::new(horizon, action_dim, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(proposals, scores)
    }

    /// Inverse of [`ProposalSet::from_flat`].
    pub fn flatten(&self) -> Vec<f64> {
        self.proposals.iter().flat_map(|p| p.values().iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn proposals(&self) -> &[ActionChunk] {
        &self.proposals
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn proposal(&self, k: usize) -> &ActionChunk {
        &self.proposals[k]
    }
}
