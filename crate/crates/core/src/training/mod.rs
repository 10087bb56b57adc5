//! Skill pre-training with a per-rollout latent and MI bonus, and downstream
//! training of a manager over frozen skills.

mod hierarchy;
mod pretrain;
mod rollout;

pub use hierarchy::{
    collect_macro_batch, com_proxy_env, downstream_iteration, evaluate_flat, evaluate_hierarchy, flat_iteration,
    hierarchical_rollout, DownstreamConfig, DownstreamMetrics, DownstreamState, Evaluation, FlatState,
    MacroTrajectory, SkillMode, SkillSet, COM_PROXY_COEF,
};
pub use pretrain::{
    multipolicy_seed, pretrain, pretrain_iteration, train_multipolicy_skills, PretrainConfig, PretrainMetrics,
    PretrainState,
};
pub use rollout::{
    baseline_obs, collect_batch, flat_rollout, rollout_stream, snn_update, FlatRollout, LatentDraw,
};
