//! Core numerics and policies for multimodal imitation learning.
//!
//! * [`numerics`]: tensors, MLPs with exact gradients, the optimizer, seeded RNG.
//! * [`policy`]: the K-proposal choice policy and its winner-takes-all objective.
//! * [`baselines`]: behavior cloning, selection ablations and an iterative denoiser.
//! * [`bundle`]: a trained model packaged with its normalization statistics.

pub mod baselines;
pub mod bundle;
pub mod error;
pub mod numerics;
pub mod policy;
pub mod textfmt;

pub use error::{Error, Result};
