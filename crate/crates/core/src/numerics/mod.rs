//! Dense tensors, MLPs with analytic gradients, the optimizer and seeded randomness.

mod mlp;
mod optim;
mod rng;
mod tensor;

pub use mlp::{Activation, Dense, ForwardCache, Mlp, MlpGrads};
pub use optim::{Adam, AdamConfig, ParamSlot};
pub use rng::SeededRng;
pub use tensor::Tensor;
