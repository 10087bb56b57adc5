//! Differentiable policies: Gaussian MLP / SNN and the categorical manager.

pub mod checkpoint;
mod gaussian;
mod manager;
mod mlp;
mod snn;

pub use gaussian::GaussianActionDist;
pub use manager::{categorical_kl, softmax, ManagerPolicy};
pub use mlp::{Mlp, MlpCache, MlpSpec, Nonlinearity};
pub use snn::{embed_bilinear, embed_concat, one_hot, Integration, SnnPolicy};
