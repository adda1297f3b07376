//! Comparison policies: plain behavior cloning, selection-rule ablations and an iterative denoiser.

mod bc;
mod denoiser;
mod selection;

pub use bc::{BcConfig, BcModel};
pub use denoiser::{DenoiserConfig, DenoiserModel, NoiseSchedule};
pub use selection::{select_with_strategy, Selection, SelectionStrategy};
