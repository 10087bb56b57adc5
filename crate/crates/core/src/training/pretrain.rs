use serde::{Deserialize, Serialize};

use super::rollout::{collect_batch, new_flat_baseline, snn_update, LatentDraw};
use crate::base::{RngStream, StreamTag, TrajectoryBatch};
use crate::envs::{Dynamics, EnvConfig, AGENT_DIM};
use crate::error::{Error, Result};
use crate::mi::{accumulate, apply_mi_bonus, MiConfig, VisitationGrid, DEFAULT_MESH_DENSITY};
use crate::policy::{Integration, MlpSpec, SnnPolicy};
use crate::trpo::{LinearBaseline, StepDiagnostics, TrpoConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub k: usize,
    pub integration: Integration,
    pub mi: MiConfig,
    pub mesh_density: f64,
    /// Timesteps per iteration.
    pub batch_size: usize,
    pub horizon: usize,
    pub n_iterations: usize,
    pub seed: u64,
    pub policy: MlpSpec,
    pub trpo: TrpoConfig,
    pub dynamics: Dynamics,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            k: 6,
            integration: Integration::Bilinear,
            mi: MiConfig {
                alpha_h: 0.01,
                ..MiConfig::default()
            },
            mesh_density: DEFAULT_MESH_DENSITY,
            batch_size: 10_000,
            horizon: 500,
            n_iterations: 200,
            seed: 0,
            policy: MlpSpec::default(),
            trpo: TrpoConfig::default(),
            dynamics: Dynamics::default(),
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, constraint: &str| {
            Err(Error::Config {
                field: format!("pretrain.{field}"),
                constraint: constraint.into(),
            })
        };
        if self.integration == Integration::Plain {
            if self.k != 1 {
                return bad("k", "plain integration requires k = 1");
            }
        } else if self.k < 2 {
            return bad("k", "must be >= 2");
        }
        if self.horizon < 1 {
            return bad("horizon", "must be >= 1");
        }
        if self.batch_size < self.horizon {
            return bad("batch_size", "must be >= horizon");
        }
        if !(self.mesh_density > 0.0 && self.mesh_density.is_finite()) {
            return bad("mesh_density", "must be > 0");
        }
        if self.k >= 2 {
            self.mi.validate(self.k)?;
        }
        self.policy.validate()?;
        self.trpo.validate()?;
        self.dynamics.validate()
    }

    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            dynamics: self.dynamics,
            ..EnvConfig::pretrain()
        }
    }
}

/// Policy and baseline carried across iterations.
#[derive(Debug, Clone)]
pub struct PretrainState {
    pub policy: SnnPolicy,
    pub baseline: LinearBaseline,
    pub iteration: usize,
}

impl PretrainState {
    pub fn new(config: &PretrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::new(config.seed, crate::base::stream_id(StreamTag::PolicyInit, 0, 0));
        let policy = SnnPolicy::new(
            AGENT_DIM,
            2,
            config.k,
            config.integration,
            config.policy.clone(),
            &mut rng,
        )?;
        let baseline = new_flat_baseline(&policy, config.horizon);
        Ok(Self {
            policy,
            baseline,
            iteration: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PretrainMetrics {
    pub iteration: usize,
    /// Mean undiscounted environment return per rollout.
    pub mean_raw_return: f64,
    /// Mean return after the MI bonus.
    pub mean_return: f64,
    /// Mean environment reward per timestep (the speed).
    pub mean_step_reward: f64,
    pub per_latent_return: Vec<Option<f64>>,
    pub timesteps: usize,
    pub grid: VisitationGrid,
    pub step: StepDiagnostics,
}

fn per_latent(batch: &TrajectoryBatch, k: usize) -> Vec<Option<f64>> {
    let mut sums = vec![(0.0, 0usize); k];
    for t in &batch.trajectories {
        sums[t.latent].0 += t.raw_rewards.iter().sum::<f64>();
        sums[t.latent].1 += 1;
    }
    sums.into_iter()
        .map(|(s, n)| (n > 0).then(|| s / n as f64))
        .collect()
}

/// Collect, count visits, add the MI bonus, update.
pub fn pretrain_iteration(state: &mut PretrainState, config: &PretrainConfig) -> Result<PretrainMetrics> {
    let (batch, _) = collect_batch(
        &state.policy,
        &config.env(),
        LatentDraw::Uniform(config.k),
        config.batch_size,
        config.horizon,
        config.seed,
        state.iteration as u64,
    )?;
    let grid = accumulate(&batch, config.mesh_density, config.k)?;
    let batch = apply_mi_bonus(batch, &grid, &config.mi)?;
    let step = snn_update(&mut state.policy, &mut state.baseline, &batch, &config.trpo)?;
    let timesteps = batch.timesteps();
    let total_raw: f64 = batch
        .trajectories
        .iter()
        .flat_map(|t| t.raw_rewards.iter())
        .sum();
    let total_mod: f64 = batch.trajectories.iter().flat_map(|t| t.rewards.iter()).sum();
    let metrics = PretrainMetrics {
        iteration: state.iteration,
        mean_raw_return: batch.mean_raw_return(),
        mean_return: total_mod / batch.len() as f64,
        mean_step_reward: total_raw / timesteps as f64,
        per_latent_return: per_latent(&batch, config.k),
        timesteps,
        grid,
        step,
    };
    state.iteration += 1;
    Ok(metrics)
}

/// Full pre-training run; `on_iteration` sees every iteration's metrics.
pub fn pretrain(config: &PretrainConfig, mut on_iteration: impl FnMut(&PretrainMetrics)) -> Result<SnnPolicy> {
    let mut state = PretrainState::new(config)?;
    for _ in 0..config.n_iterations {
        let m = pretrain_iteration(&mut state, config)?;
        on_iteration(&m);
    }
    Ok(state.policy)
}

/// Seed of the `index`-th independently trained policy; index 0 keeps the
/// base seed.
pub fn multipolicy_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(1_000_003))
}

/// `k` independent plain Gaussian policies trained on the speed reward, each
/// from its own seed. Returns them with the total environment steps spent.
pub fn train_multipolicy_skills(config: &PretrainConfig) -> Result<(Vec<SnnPolicy>, usize)> {
    let mut policies = Vec::with_capacity(config.k);
    let mut steps = 0;
    for i in 0..config.k {
        let single = PretrainConfig {
            k: 1,
            integration: Integration::Plain,
            mi: MiConfig {
                alpha_h: 0.0,
                ..config.mi
            },
            seed: multipolicy_seed(config.seed, i),
            ..config.clone()
        };
        let p = pretrain(&single, |m| steps += m.timesteps)?;
        policies.push(p);
    }
    Ok((policies, steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PretrainConfig {
        PretrainConfig {
            batch_size: 400,
            horizon: 40,
            n_iterations: 2,
            policy: MlpSpec::new(vec![8]),
            ..Default::default()
        }
    }

    #[test]
    fn batch_has_whole_rollouts_with_constant_latents() {
        let cfg = PretrainConfig {
            batch_size: 10_000,
            horizon: 500,
            ..small()
        };
        let state = PretrainState::new(&cfg).unwrap();
        let (b, _) = collect_batch(&state.policy, &cfg.env(), LatentDraw::Uniform(6), 10_000, 500, 1, 0).unwrap();
        assert_eq!(b.len(), 20);
        for t in &b.trajectories {
            assert_eq!(t.len(), 500);
            t.validate(500).unwrap();
        }
    }

    #[test]
    fn latent_frequencies_within_binomial_bounds() {
        let cfg = small();
        let state = PretrainState::new(&cfg).unwrap();
        let (b, _) = collect_batch(&state.policy, &cfg.env(), LatentDraw::Uniform(6), 20 * 5, 5, 3, 0).unwrap();
        assert_eq!(b.len(), 20);
        let n: f64 = 20.0;
        let p = 1.0 / 6.0;
        let sd = (n * p * (1.0 - p)).sqrt();
        for z in 0..6 {
            let c = b.trajectories.iter().filter(|t| t.latent == z).count() as f64;
            assert!((c - n * p).abs() <= 3.0 * sd, "latent {z}: {c}");
        }
    }

    #[test]
    fn plain_policy_uses_latent_zero() {
        let cfg = PretrainConfig {
            k: 1,
            integration: Integration::Plain,
            ..small()
        };
        let state = PretrainState::new(&cfg).unwrap();
        let (b, _) = collect_batch(&state.policy, &cfg.env(), LatentDraw::Uniform(1), 200, 40, 0, 0).unwrap();
        assert!(b.trajectories.iter().all(|t| t.latent == 0));
    }

    #[test]
    fn collection_is_deterministic() {
        let cfg = small();
        let state = PretrainState::new(&cfg).unwrap();
        let env = cfg.env();
        let a = collect_batch(&state.policy, &env, LatentDraw::Uniform(6), 400, 40, 9, 2).unwrap();
        let b = collect_batch(&state.policy, &env, LatentDraw::Uniform(6), 400, 40, 9, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_is_rebuilt_each_iteration() {
        let cfg = small();
        let mut state = PretrainState::new(&cfg).unwrap();
        for _ in 0..2 {
            let m = pretrain_iteration(&mut state, &cfg).unwrap();
            assert_eq!(m.grid.total() as usize, m.timesteps);
        }
    }

    #[test]
    fn zero_alpha_keeps_raw_rewards() {
        let cfg = PretrainConfig {
            mi: MiConfig::default(),
            ..small()
        };
        let state = PretrainState::new(&cfg).unwrap();
        let (b, _) = collect_batch(&state.policy, &cfg.env(), LatentDraw::Uniform(6), 400, 40, 0, 0).unwrap();
        let grid = accumulate(&b, 10.0, 6).unwrap();
        let out = apply_mi_bonus(b, &grid, &cfg.mi).unwrap();
        for t in &out.trajectories {
            let same = t.rewards.iter().zip(&t.raw_rewards).all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same);
        }
    }

    #[test]
    fn multipolicy_bookkeeping() {
        let cfg = PretrainConfig {
            k: 3,
            ..small()
        };
        let (ps, steps) = train_multipolicy_skills(&cfg).unwrap();
        assert_eq!(ps.len(), 3);
        assert_eq!(steps, 3 * cfg.n_iterations * cfg.batch_size);
        assert!(ps.iter().all(|p| p.integration == Integration::Plain));
        assert_ne!(ps[0].params, ps[1].params);

        // a single policy equals a plain run with the base seed
        let one = PretrainConfig { k: 1, ..cfg.clone() };
        let (single, _) = train_multipolicy_skills(&one).unwrap();
        let plain = PretrainConfig {
            k: 1,
            integration: Integration::Plain,
            mi: MiConfig::default(),
            ..cfg
        };
        assert_eq!(single[0], pretrain(&plain, |_| {}).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(PretrainConfig::default().validate().is_ok());
        let c = PretrainConfig { k: 1, ..Default::default() };
        assert!(c.validate().is_err());
        let c = PretrainConfig {
            batch_size: 100,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
