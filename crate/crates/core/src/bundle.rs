use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{BcModel, DenoiserModel, SelectionStrategy};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::policy::{ActionChunk, ChoicePolicyModel, NormalizationStats, ProposalSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Bc,
    Choice,
    Denoiser,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bc => "bc",
            Self::Choice => "choice",
            Self::Denoiser => "denoiser",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bc" => Ok(Self::Bc),
            "choice" => Ok(Self::Choice),
            "denoiser" => Ok(Self::Denoiser),
            other => Err(Error::InvalidInput(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum PolicyModel {
    Bc(BcModel),
    Choice(ChoicePolicyModel),
    Denoiser(DenoiserModel),
}

impl PolicyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Bc(_) => ModelKind::Bc,
            Self::Choice(_) => ModelKind::Choice,
            Self::Denoiser(_) => ModelKind::Denoiser,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Self::Bc(m) => m.config().obs_dim,
            Self::Choice(m) => m.config().obs_dim,
            Self::Denoiser(m) => m.config().obs_dim,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            Self::Bc(m) => m.config().action_dim,
            Self::Choice(m) => m.config().action_dim,
            Self::Denoiser(m) => m.config().action_dim,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Self::Bc(m) => m.config().horizon,
            Self::Choice(m) => m.config().horizon,
            Self::Denoiser(m) => m.config().horizon,
        }
    }

    /// Number of proposals; 1 for single-output models.
    pub fn num_proposals(&self) -> usize {
        match self {
            Self::Choice(m) => m.config().num_proposals,
            _ => 1,
        }
    }
}

/// Output of one policy query in raw (unnormalized) action units.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub chunk: ActionChunk,
    pub head: Option<usize>,
}

/// A trained model together with the statistics its inputs and outputs are normalized by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBundle {
    pub model: PolicyModel,
    pub stats: NormalizationStats,
}

impl PolicyBundle {
    pub fn new(model: PolicyModel, stats: NormalizationStats) -> Result<Self> {
        if stats.obs_dim() != model.obs_dim() || stats.action_dim() != model.action_dim() {
            return Err(Error::ShapeMismatch {
                context: "PolicyBundle::new",
                expected: format!("obs {}, action {}", model.obs_dim(), model.action_dim()),
                actual: format!("obs {}, action {}", stats.obs_dim(), stats.action_dim()),
            });
        }
        Ok(Self { model, stats })
    }

    /// Proposal set in normalized units, for choice models only.
    pub fn propose_normalized(&self, obs: &[f64]) -> Result<Option<ProposalSet>> {
        match &self.model {
            PolicyModel::Choice(m) => m.propose(&self.stats.normalize_obs(obs)?).map(Some),
            _ => Ok(None),
        }
    }

    /// Maps a raw observation to a raw action chunk. `strategy` only affects choice models.
    pub fn decide(&self, obs: &[f64], strategy: SelectionStrategy, rng: &mut SeededRng) -> Result<Decision> {
        let x = self.stats.normalize_obs(obs)?;
        let (chunk, head) = match &self.model {
            PolicyModel::Bc(m) => (m.infer(&x)?, None),
            PolicyModel::Choice(m) => {
                let sel = strategy.select(&m.propose(&x)?, rng)?;
                (sel.chunk, sel.head)
            }
            PolicyModel::Denoiser(m) => (m.sample(&x, rng)?, None),
        };
        Ok(Decision {
            chunk: self.stats.denormalize_chunk(&chunk)?,
            head,
        })
    }
}
