use super::chunk::{ActionChunk, ProposalSet};
use crate::error::{shape_err, Error, Result};

/// Mean squared error between two chunks over every step and dimension.
pub fn chunk_mse(pred: &ActionChunk, target: &ActionChunk) -> Result<f64> {
    if !pred.same_shape(target) {
        return Err(shape_err(
            "chunk_mse",
            format!("{}x{}", target.horizon(), target.action_dim()),
            format!("{}x{}", pred.horizon(), pred.action_dim()),
        ));
    }
    let n = target.values().len() as f64;
    Ok(pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Per-proposal MSE against the ground-truth chunk.
pub fn per_proposal_loss(proposals: &ProposalSet, target: &ActionChunk) -> Result<Vec<f64>> {
    proposals.proposals().iter().map(|p| chunk_mse(p, target)).collect()
}

/// Index of the smallest value; ties go to the lowest index.
pub fn select_winner(losses: &[f64]) -> Result<usize> {
    if losses.is_empty() {
        return Err(Error::InvalidInput("cannot select a winner from zero proposals".into()));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("select_winner".into()));
    }
    let mut best = 0;
    for (k, &l) in losses.iter().enumerate().skip(1) {
        if l < losses[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Mean squared gap between predicted scores and the (constant) per-proposal losses.
pub fn score_loss(scores: &[f64], losses: &[f64]) -> Result<f64> {
    if scores.len() != losses.len() || scores.is_empty() {
        return Err(shape_err("score_loss", losses.len(), scores.len()));
    }
    Ok(scores
        .iter()
        .zip(losses)
        .map(|(s, l)| (s - l) * (s - l))
        .sum::<f64>()
        / scores.len() as f64)
}
