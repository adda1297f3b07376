use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::policy::{select_winner, ActionChunk, ProposalSet};

/// How one chunk is picked out of a proposal set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SelectionStrategy {
    /// Lowest predicted error.
    #[default]
    Score,
    /// Uniformly random proposal.
    Random,
    /// Entrywise average of all proposals.
    Mean,
    /// Always the same proposal.
    Single(usize),
}

/// The selected chunk and, unless proposals were averaged, the head it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub chunk: ActionChunk,
    pub head: Option<usize>,
}

impl SelectionStrategy {
    /// Every strategy evaluated in an ablation over `k` proposals: score, random, mean, then each single head.
    pub fn ablation_set(k: usize) -> Vec<SelectionStrategy> {
        let mut all = vec![Self::Score, Self::Random, Self::Mean];
        all.extend((0..k).map(Self::Single));
        all
    }

    pub fn select(&self, proposals: &ProposalSet, rng: &mut SeededRng) -> Result<Selection> {
        match *self {
            Self::Score => {
                let k = select_winner(proposals.scores())?;
                Ok(Selection {
                    chunk: proposals.proposal(k).clone(),
                    head: Some(k),
                })
            }
            Self::Random => {
                let k = rng.index(proposals.len());
                Ok(Selection {
                    chunk: proposals.proposal(k).clone(),
                    head: Some(k),
                })
            }
            Self::Mean => {
                let first = proposals.proposal(0);
                let mut sum = vec![0.0; first.values().len()];
                for p in proposals.proposals() {
                    sum.iter_mut().zip(p.values()).for_each(|(s, v)| *s += v);
                }
                let k = proposals.len() as f64;
                sum.iter_mut().for_each(|s| *s /= k);
                Ok(Selection {
                    chunk: ActionChunk::new(first.horizon(), first.action_dim(), sum)?,
                    head: None,
                })
            }
            Self::Single(k) => {
                if k >= proposals.len() {
                    return Err(Error::InvalidInput(format!(
                        "single-choice index {k} out of range for {} proposals",
                        proposals.len()
                    )));
                }
                Ok(Selection {
                    chunk: proposals.proposal(k).clone(),
                    head: Some(k),
                })
            }
        }
    }
}

/// Function form of [`SelectionStrategy::select`].
pub fn select_with_strategy(
    proposals: &ProposalSet,
    strategy: SelectionStrategy,
    rng: &mut SeededRng,
) -> Result<Selection> {
    strategy.select(proposals, rng)
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Score => f.write_str("score"),
            Self::Random => f.write_str("random"),
            Self::Mean => f.write_str("mean"),
            Self::Single(k) => write!(f, "single:{k}"),
        }
    }
}

impl FromStr for SelectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(Self::Score),
            "random" => Ok(Self::Random),
            "mean" => Ok(Self::Mean),
            other => other
                .strip_prefix("single:")
                .and_then(|k| k.parse().ok())
                .map(Self::Single)
                .ok_or_else(|| Error::InvalidInput(format!("unknown selection strategy `{other}`"))),
        }
    }
}
