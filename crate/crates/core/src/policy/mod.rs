//! The choice policy: proposals, scores, winner-takes-all training and argmin-score inference.

mod chunk;
mod loss;
mod model;
mod norm;
mod train;

pub use chunk::{ActionChunk, ProposalSet};
pub use loss::{chunk_mse, per_proposal_loss, score_loss, select_winner};
pub use model::{ChoiceConfig, ChoiceGrads, ChoicePolicyModel, LossBreakdown};
pub use norm::{NormalizationStats, STD_FLOOR};
pub use train::{FitConfig, FitLog, Sample, StepLoss};

pub(crate) use model::{build_encoder, build_head};
pub(crate) use train::{check_samples, run_minibatches};
