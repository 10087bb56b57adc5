use rand::Rng;
use rayon::prelude::*;

use crate::base::{stream_id, RngStream, StreamTag, Trajectory, TrajectoryBatch};
use crate::envs::{EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::policy::{one_hot, SnnPolicy};
use crate::trpo::{advantages, trpo_step, EpisodeView, LinearBaseline, SampleBatch, StepDiagnostics, TrpoConfig};

/// How each rollout's latent code is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentDraw {
    /// Uniform over `[0, k)`, drawn once at reset.
    Uniform(usize),
    Fixed(usize),
}

/// Root stream of rollout `index` in iteration `iteration` of a phase.
pub fn rollout_stream(seed: u64, phase: StreamTag, iteration: u64, index: u64) -> RngStream {
    RngStream::new(seed, stream_id(phase, iteration, index))
}

/// A flat rollout together with whether the task reported success.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatRollout {
    pub trajectory: Trajectory,
    pub success: bool,
}

/// One rollout of `policy` on the full observation, latent held fixed.
pub fn flat_rollout(
    policy: &SnnPolicy,
    env: &mut dyn Environment,
    latent: LatentDraw,
    horizon: usize,
    root: &RngStream,
) -> Result<FlatRollout> {
    let z = match latent {
        LatentDraw::Uniform(k) => root.derive(StreamTag::Latent, 0, 0).random_range(0..k),
        LatentDraw::Fixed(z) => z,
    };
    let mut env_rng = root.derive(StreamTag::Env, 0, 0);
    let mut act_rng = root.derive(StreamTag::Action, 0, 0);
    let mut obs = env.reset(&mut env_rng)?;
    let mut traj = Trajectory::with_capacity(z, horizon);
    let mut success = false;
    for _ in 0..horizon {
        let (action, lp) = policy.act(&obs.full(), z, &mut act_rng)?;
        let step = env.step(&action)?;
        traj.push(obs, action, step.reward, lp, env.com());
        success |= step.success;
        obs = step.obs;
        if step.done {
            break;
        }
    }
    Ok(FlatRollout {
        trajectory: traj,
        success,
    })
}

/// Run `f(index)` for consecutive rollout indices in parallel waves until
/// the summed lengths reach `batch_size`. Results come back in index order,
/// so the batch is independent of scheduling.
pub(crate) fn collect_waves<T, F>(batch_size: usize, horizon: usize, len: impl Fn(&T) -> usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let mut out = Vec::new();
    let mut steps = 0;
    let mut next = 0u64;
    while steps < batch_size {
        let wave = (batch_size - steps).div_ceil(horizon.max(1)) as u64;
        let results = (next..next + wave)
            .into_par_iter()
            .map(&f)
            .collect::<Result<Vec<T>>>()?;
        next += wave;
        for r in results {
            let n = len(&r);
            if n == 0 {
                return Err(Error::InvalidArgument("environment produced an empty rollout".into()));
            }
            steps += n;
            out.push(r);
        }
    }
    Ok(out)
}

/// Rollouts until at least `batch_size` timesteps are collected, plus each
/// rollout's success flag.
pub fn collect_batch(
    policy: &SnnPolicy,
    env: &EnvConfig,
    latent: LatentDraw,
    batch_size: usize,
    horizon: usize,
    seed: u64,
    iteration: u64,
) -> Result<(TrajectoryBatch, Vec<bool>)> {
    match latent {
        LatentDraw::Uniform(k) if k == 0 || k > policy.k => {
            return Err(Error::LatentOutOfRange { latent: k, k: policy.k })
        }
        LatentDraw::Fixed(z) if z >= policy.k => {
            return Err(Error::LatentOutOfRange { latent: z, k: policy.k })
        }
        _ => {}
    }
    let rollouts = collect_waves(
        batch_size,
        horizon,
        |r: &FlatRollout| r.trajectory.len(),
        |i| {
            let mut e = env.build();
            flat_rollout(policy, e.as_mut(), latent, horizon, &rollout_stream(seed, StreamTag::Action, iteration, i))
        },
    )?;
    let successes = rollouts.iter().map(|r| r.success).collect();
    let batch = TrajectoryBatch::new(rollouts.into_iter().map(|r| r.trajectory).collect());
    Ok((batch, successes))
}

/// Baseline regressor input for a flat policy: observation plus one-hot
/// latent.
pub fn baseline_obs(obs: &[f64], z: usize, k: usize) -> Result<Vec<f64>> {
    let mut v = obs.to_vec();
    v.extend(one_hot(z, k)?);
    Ok(v)
}

pub fn new_flat_baseline(policy: &SnnPolicy, horizon: usize) -> LinearBaseline {
    LinearBaseline::new(policy.obs_dim + policy.k, horizon)
}

/// Advantages from the batch's (possibly modified) rewards, then one
/// constrained update with the latent as part of the input.
pub fn snn_update(
    policy: &mut SnnPolicy,
    baseline: &mut LinearBaseline,
    batch: &TrajectoryBatch,
    trpo: &TrpoConfig,
) -> Result<StepDiagnostics> {
    let mut samples = SampleBatch::default();
    let mut ep_obs = Vec::with_capacity(batch.len());
    for traj in &batch.trajectories {
        let mut b_obs = Vec::with_capacity(traj.len());
        for ((o, a), lp) in traj.observations.iter().zip(&traj.actions).zip(&traj.log_probs) {
            let full = o.full();
            samples.inputs.push(policy.embed(&full, traj.latent)?);
            samples.actions.push(a.clone());
            samples.old_log_probs.push(*lp);
            b_obs.push(baseline_obs(&full, traj.latent, policy.k)?);
        }
        ep_obs.push(b_obs);
    }
    let episodes: Vec<EpisodeView> = ep_obs
        .iter()
        .zip(&batch.trajectories)
        .map(|(o, t)| EpisodeView {
            obs: o,
            rewards: &t.rewards,
        })
        .collect();
    samples.advantages = advantages(baseline, &episodes, trpo.discount)?;
    trpo_step(policy, &samples, trpo)
}
