//! Trust-region policy optimization: linear baseline, advantages, surrogate
//! objective, KL Fisher-vector products, conjugate gradient and a
//! backtracking line search under a mean-KL constraint.

mod baseline;
mod model;
mod optimize;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use baseline::{advantages, fit_baseline, EpisodeView, LinearBaseline, BASELINE_RIDGE};
pub use model::TrpoModel;
pub use optimize::{
    conjugate_gradient, fisher_vector_product, surrogate_grad, surrogate_loss, trpo_step, CgResult,
    FisherContext, SampleBatch, StepDiagnostics, MAX_LOG_RATIO,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrpoConfig {
    pub step_kl: f64,
    pub discount: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            step_kl: 0.01,
            discount: 0.99,
            cg_iters: 10,
            cg_damping: 1e-5,
            backtrack_ratio: 0.8,
            max_backtracks: 15,
        }
    }
}

impl TrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, constraint: &str| {
            Err(Error::Config {
                field: format!("trpo.{field}"),
                constraint: constraint.into(),
            })
        };
        if !(self.step_kl > 0.0 && self.step_kl.is_finite()) {
            return bad("step_kl", "must be > 0");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount", "must lie in [0, 1]");
        }
        if self.cg_iters < 1 {
            return bad("cg_iters", "must be >= 1");
        }
        if !(self.cg_damping >= 0.0 && self.cg_damping.is_finite()) {
            return bad("cg_damping", "must be >= 0");
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return bad("backtrack_ratio", "must lie in (0, 1)");
        }
        Ok(())
    }
}

/// One line of the per-iteration progress log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub surrogate: f64,
    pub kl: f64,
    pub step_norm: f64,
    pub backtracks: usize,
    pub residual: f64,
}

impl ProgressRow {
    pub fn new(iteration: usize, mean_return: f64, d: &StepDiagnostics) -> Self {
        Self {
            iteration,
            mean_return,
            surrogate: d.surrogate_after,
            kl: d.kl,
            step_norm: d.step_norm,
            backtracks: d.backtracks,
            residual: d.cg_residual,
        }
    }
}

pub fn write_progress(rows: &[ProgressRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
