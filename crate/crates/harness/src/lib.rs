//! Reproducible experiments over the choice policy and its baselines:
//! dataset generation, training, closed-loop evaluation, selection ablations,
//! latency benchmarks and reports regenerated from rollout logs.

pub mod artifact;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod stats;

pub use config::{Algo, RunConfig};
pub use error::{HarnessError, Result};
