//! Skill pre-training with stochastic neural network policies and
//! hierarchical control over the learned skills.
//!
//! The crate is split along the two training phases:
//!
//! - [`envs`]: damped point-robot surrogates (free arena, walled mazes,
//!   gather arena) and the ray-cast sensor model.
//! - [`policy`]: Gaussian MLP / SNN policies with concat or bilinear latent
//!   integration, and the categorical manager.
//! - [`mi`]: visitation counts and the count-based latent posterior used as
//!   a reward bonus.
//! - [`trpo`]: trust-region policy optimization (baseline, Fisher-vector
//!   products, conjugate gradient, line search).
//! - [`training`]: pre-training and downstream hierarchical loops.
//! - [`analysis`]: visitation, diversity, coverage and learning-curve tools.
//! - [`cli`]: experiment configuration and the subcommand drivers.

pub mod analysis;
pub mod base;
pub mod cli;
pub mod envs;
pub mod error;
pub mod mi;
pub mod policy;
pub mod training;
pub mod trpo;

pub use error::{Error, Result};
