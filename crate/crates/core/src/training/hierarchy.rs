use serde::{Deserialize, Serialize};

use super::rollout::{
    collect_batch, collect_waves, flat_rollout, new_flat_baseline, rollout_stream, snn_update, LatentDraw,
};
use crate::base::{stream_id, RngStream, StreamTag, Vec2};
use crate::envs::{EnvConfig, EnvKind, Environment};
use crate::error::{Error, Result};
use crate::policy::{ManagerPolicy, MlpSpec, SnnPolicy};
use crate::trpo::{advantages, trpo_step, EpisodeView, LinearBaseline, SampleBatch, StepDiagnostics, TrpoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillMode {
    Snn,
    Multipolicy,
}

/// Frozen low-level skills, driven by the agent block of the observation.
#[derive(Debug, Clone, PartialEq)]
pub enum SkillSet {
    /// One network, skill = latent code.
    Snn(SnnPolicy),
    /// Skill `z` is the `z`-th independent plain policy.
    Multi(Vec<SnnPolicy>),
}

impl SkillSet {
    pub fn k(&self) -> usize {
        match self {
            SkillSet::Snn(p) => p.k,
            SkillSet::Multi(ps) => ps.len(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            SkillSet::Snn(p) => p.obs_dim,
            SkillSet::Multi(ps) => ps.first().map_or(0, |p| p.obs_dim),
        }
    }

    pub fn validate(&self, agent_dim: usize) -> Result<()> {
        let policies: Vec<&SnnPolicy> = match self {
            SkillSet::Snn(p) => vec![p],
            SkillSet::Multi(ps) => ps.iter().collect(),
        };
        if policies.is_empty() {
            return Err(Error::InvalidArgument("empty skill bank".into()));
        }
        for p in policies {
            if p.obs_dim != agent_dim {
                return Err(Error::Dimension {
                    what: "skill observation (agent block)",
                    expected: agent_dim,
                    got: p.obs_dim,
                });
            }
        }
        Ok(())
    }

    pub fn act(&self, agent_obs: &[f64], z: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        let (a, _) = match self {
            SkillSet::Snn(p) => p.act(agent_obs, z, rng)?,
            SkillSet::Multi(ps) => ps
                .get(z)
                .ok_or(Error::LatentOutOfRange {
                    latent: z,
                    k: ps.len(),
                })?
                .act(agent_obs, 0, rng)?,
        };
        Ok(a)
    }

    /// Every skill parameter, concatenated.
    pub fn parameters(&self) -> Vec<f64> {
        match self {
            SkillSet::Snn(p) => p.params.values.clone(),
            SkillSet::Multi(ps) => ps.iter().flat_map(|p| p.params.values.iter().copied()).collect(),
        }
    }
}

/// Manager-level record of one hierarchical episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MacroTrajectory {
    /// Full observation at each switch time.
    pub observations: Vec<Vec<f64>>,
    pub skills: Vec<usize>,
    /// Sum of low-level rewards in each window.
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub window_lengths: Vec<usize>,
    pub low_rewards: Vec<f64>,
    /// Robot position after every low-level step.
    pub positions: Vec<Vec2>,
    pub success: bool,
}

impl MacroTrajectory {
    pub fn steps(&self) -> usize {
        self.low_rewards.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.low_rewards.iter().sum()
    }

    /// Window sums add up to the low-level total, bitwise.
    pub fn reward_conserved(&self) -> bool {
        let macro_total: f64 = self.rewards.iter().sum();
        macro_total.to_bits() == self.total_reward().to_bits()
    }
}

/// Run one episode: every `switch_time` steps the manager picks a skill from
/// the full observation, which then acts on the agent block until the next
/// switch. Early termination truncates the last window.
pub fn hierarchical_rollout(
    manager: &ManagerPolicy,
    skills: &SkillSet,
    env: &mut dyn Environment,
    switch_time: usize,
    horizon: usize,
    root: &RngStream,
) -> Result<MacroTrajectory> {
    if switch_time == 0 || switch_time > horizon {
        return Err(Error::Config {
            field: "switch_time".into(),
            constraint: format!("must lie in [1, horizon = {horizon}]"),
        });
    }
    if manager.k != skills.k() {
        return Err(Error::Dimension {
            what: "manager skill count",
            expected: skills.k(),
            got: manager.k,
        });
    }
    let mut env_rng = root.derive(StreamTag::Env, 0, 0);
    let mut mgr_rng = root.derive(StreamTag::Manager, 0, 0);
    let mut act_rng = root.derive(StreamTag::Action, 0, 0);
    let mut obs = env.reset(&mut env_rng)?;
    let mut out = MacroTrajectory::default();
    let mut t = 0;
    'episode: while t < horizon {
        let full = obs.full();
        let (z, lp) = manager.act(&full, &mut mgr_rng)?;
        out.observations.push(full);
        out.skills.push(z);
        out.log_probs.push(lp);
        let mut window = 0.0;
        let mut len = 0;
        let end = (t + switch_time).min(horizon);
        let mut done = false;
        while t < end {
            let action = skills.act(&obs.agent, z, &mut act_rng)?;
            let step = env.step(&action)?;
            window += step.reward;
            len += 1;
            t += 1;
            out.low_rewards.push(step.reward);
            out.positions.push(env.com());
            out.success |= step.success;
            obs = step.obs;
            if step.done {
                done = true;
                break;
            }
        }
        out.rewards.push(window);
        out.window_lengths.push(len);
        if done {
            break 'episode;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownstreamConfig {
    pub env: EnvConfig,
    pub switch_time: usize,
    /// Low-level timesteps per iteration.
    pub batch_size: usize,
    pub horizon: usize,
    pub n_iterations: usize,
    pub seed: u64,
    pub manager: MlpSpec,
    pub trpo: TrpoConfig,
    pub eval_episodes: usize,
    /// Evaluate every this many iterations (and after the last).
    pub eval_every: usize,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        Self::for_task(EnvConfig::maze(0).expect("maze 0 exists"))
    }
}

impl DownstreamConfig {
    /// Desk-scale settings for `env`: horizon 400, switch time 10 on gather
    /// and 50 on the mazes.
    pub fn for_task(env: EnvConfig) -> Self {
        let switch_time = match env.task {
            EnvKind::Gather { .. } => 10,
            _ => 50,
        };
        Self {
            env,
            switch_time,
            batch_size: 10_000,
            horizon: 400,
            n_iterations: 300,
            seed: 0,
            manager: MlpSpec::default(),
            trpo: TrpoConfig::default(),
            eval_episodes: 20,
            eval_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, constraint: &str| {
            Err(Error::Config {
                field: format!("downstream.{field}"),
                constraint: constraint.into(),
            })
        };
        if self.switch_time < 1 || self.switch_time > self.horizon {
            return bad("switch_time", "must satisfy 1 <= switch_time <= horizon");
        }
        if self.batch_size < 1 {
            return bad("batch_size", "must be >= 1");
        }
        if self.eval_every < 1 {
            return bad("eval_every", "must be >= 1");
        }
        self.env.validate()?;
        self.manager.validate()?;
        self.trpo.validate()
    }

    pub fn macro_horizon(&self) -> usize {
        self.horizon.div_ceil(self.switch_time)
    }

    fn is_eval_iteration(&self, iteration: usize) -> bool {
        (iteration + 1) % self.eval_every == 0 || iteration + 1 == self.n_iterations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub success_rate: f64,
    pub mean_score: f64,
}

impl Evaluation {
    fn from_episodes(eps: &[(bool, f64)]) -> Self {
        let n = eps.len().max(1) as f64;
        Self {
            success_rate: eps.iter().filter(|e| e.0).count() as f64 / n,
            mean_score: eps.iter().map(|e| e.1).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DownstreamMetrics {
    pub iteration: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub timesteps: usize,
    /// Every rollout of the batch conserved reward across levels.
    pub reward_conserved: bool,
    pub eval: Option<Evaluation>,
    pub step: StepDiagnostics,
}

#[derive(Debug, Clone)]
pub struct DownstreamState {
    pub manager: ManagerPolicy,
    pub baseline: LinearBaseline,
    pub iteration: usize,
}

impl DownstreamState {
    pub fn new(config: &DownstreamConfig, skills: &SkillSet) -> Result<Self> {
        config.validate()?;
        let layout = config.env.layout();
        skills.validate(layout.agent_dim())?;
        let mut rng = RngStream::new(config.seed, stream_id(StreamTag::PolicyInit, 1, 0));
        let manager = ManagerPolicy::new(layout.full_dim(), skills.k(), config.manager.clone(), &mut rng)?;
        Ok(Self {
            baseline: LinearBaseline::new(layout.full_dim(), config.macro_horizon()),
            manager,
            iteration: 0,
        })
    }
}

pub fn collect_macro_batch(
    manager: &ManagerPolicy,
    skills: &SkillSet,
    config: &DownstreamConfig,
    phase: StreamTag,
    iteration: u64,
    batch_size: usize,
) -> Result<Vec<MacroTrajectory>> {
    collect_waves(batch_size, config.horizon, MacroTrajectory::steps, |i| {
        let mut env = config.env.build();
        hierarchical_rollout(
            manager,
            skills,
            env.as_mut(),
            config.switch_time,
            config.horizon,
            &rollout_stream(config.seed, phase, iteration, i),
        )
    })
}

/// `n` hierarchical episodes on evaluation streams.
pub fn evaluate_hierarchy(
    manager: &ManagerPolicy,
    skills: &SkillSet,
    config: &DownstreamConfig,
    iteration: u64,
    n: usize,
) -> Result<Evaluation> {
    let eps = (0..n as u64)
        .map(|i| {
            let mut env = config.env.build();
            let m = hierarchical_rollout(
                manager,
                skills,
                env.as_mut(),
                config.switch_time,
                config.horizon,
                &rollout_stream(config.seed, StreamTag::Evaluation, iteration, i),
            )?;
            Ok((m.success, m.total_reward()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_episodes(&eps))
}

/// Collect a manager-level batch and update only the manager.
pub fn downstream_iteration(
    state: &mut DownstreamState,
    skills: &SkillSet,
    config: &DownstreamConfig,
) -> Result<DownstreamMetrics> {
    let it = state.iteration as u64;
    let batch = collect_macro_batch(&state.manager, skills, config, StreamTag::Manager, it, config.batch_size)?;
    let mut samples = SampleBatch::default();
    for m in &batch {
        samples.inputs.extend(m.observations.iter().cloned());
        samples.actions.extend(&m.skills);
        samples.old_log_probs.extend(&m.log_probs);
    }
    let episodes: Vec<EpisodeView> = batch
        .iter()
        .map(|m| EpisodeView {
            obs: &m.observations,
            rewards: &m.rewards,
        })
        .collect();
    samples.advantages = if samples.len() >= 2 {
        advantages(&mut state.baseline, &episodes, config.trpo.discount)?
    } else {
        vec![0.0; samples.len()]
    };
    let step = trpo_step(&mut state.manager, &samples, &config.trpo)?;
    let n = batch.len() as f64;
    let metrics = DownstreamMetrics {
        iteration: state.iteration,
        mean_return: batch.iter().map(MacroTrajectory::total_reward).sum::<f64>() / n,
        success_rate: batch.iter().filter(|m| m.success).count() as f64 / n,
        timesteps: batch.iter().map(MacroTrajectory::steps).sum(),
        reward_conserved: batch.iter().all(MacroTrajectory::reward_conserved),
        eval: if config.is_eval_iteration(state.iteration) {
            Some(evaluate_hierarchy(&state.manager, skills, config, it, config.eval_episodes)?)
        } else {
            None
        },
        step,
    };
    state.iteration += 1;
    Ok(metrics)
}

/// Flat Gaussian policy on the task with the speed reward mixed in.
#[derive(Debug, Clone)]
pub struct FlatState {
    pub policy: SnnPolicy,
    pub baseline: LinearBaseline,
    pub iteration: usize,
}

/// Weight of the speed term for the flat baseline (the same proxy reward
/// the skills were trained on).
pub const COM_PROXY_COEF: f64 = 1.0;

impl FlatState {
    pub fn new(config: &DownstreamConfig, policy: MlpSpec) -> Result<Self> {
        config.validate()?;
        let layout = config.env.layout();
        let mut rng = RngStream::new(config.seed, stream_id(StreamTag::PolicyInit, 2, 0));
        let policy = SnnPolicy::plain(layout.full_dim(), 2, policy, &mut rng)?;
        Ok(Self {
            baseline: new_flat_baseline(&policy, config.horizon),
            policy,
            iteration: 0,
        })
    }
}

/// The task with the speed reward added, as seen by the flat baseline.
pub fn com_proxy_env(config: &DownstreamConfig) -> EnvConfig {
    EnvConfig {
        com_proxy_coef: COM_PROXY_COEF,
        ..config.env.clone()
    }
}

/// `n` flat episodes on the task itself (speed term excluded from the
/// score) on evaluation streams.
pub fn evaluate_flat(policy: &SnnPolicy, config: &DownstreamConfig, iteration: u64, n: usize) -> Result<Evaluation> {
    let eps = (0..n as u64)
        .map(|i| {
            let mut env = config.env.build();
            let r = flat_rollout(
                policy,
                env.as_mut(),
                LatentDraw::Fixed(0),
                config.horizon,
                &rollout_stream(config.seed, StreamTag::Evaluation, iteration, i),
            )?;
            Ok((r.success, r.trajectory.raw_rewards.iter().sum()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_episodes(&eps))
}

pub fn flat_iteration(state: &mut FlatState, config: &DownstreamConfig) -> Result<DownstreamMetrics> {
    let env = com_proxy_env(config);
    let it = state.iteration as u64;
    let (batch, successes) = collect_batch(
        &state.policy,
        &env,
        LatentDraw::Fixed(0),
        config.batch_size,
        config.horizon,
        config.seed,
        it,
    )?;
    let step = snn_update(&mut state.policy, &mut state.baseline, &batch, &config.trpo)?;
    let eval = if config.is_eval_iteration(state.iteration) {
        Some(evaluate_flat(&state.policy, config, it, config.eval_episodes)?)
    } else {
        None
    };
    let n = batch.len() as f64;
    let metrics = DownstreamMetrics {
        iteration: state.iteration,
        mean_return: batch.mean_raw_return(),
        success_rate: successes.iter().filter(|&&s| s).count() as f64 / n,
        timesteps: batch.timesteps(),
        reward_conserved: true,
        eval,
        step,
    };
    state.iteration += 1;
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{FactoredObservation, ObsLayout};
    use crate::envs::{PointRobotState, Step};
    use crate::policy::{Integration, MlpSpec};
    use std::sync::Arc;

    /// Stationary robot paying `reward` at step `pay_at`, optionally ending
    /// there.
    struct Scripted {
        t: usize,
        pay_at: usize,
        reward: f64,
        stop: bool,
        state: PointRobotState,
        layout: Arc<ObsLayout>,
    }

    impl Scripted {
        fn new(pay_at: usize, reward: f64, stop: bool) -> Self {
            Self {
                t: 0,
                pay_at,
                reward,
                stop,
                state: PointRobotState::at([0.0, 0.0]),
                layout: Arc::new(ObsLayout::new(crate::envs::dynamics::agent_fields(), vec![("t".into(), 1)])),
            }
        }
        fn obs(&self) -> FactoredObservation {
            FactoredObservation::new(vec![0.0, 0.0, 1.0, 0.0], vec![self.t as f64], self.layout.clone())
        }
    }

    impl Environment for Scripted {
        fn layout(&self) -> Arc<ObsLayout> {
            self.layout.clone()
        }
        fn reset(&mut self, _: &mut RngStream) -> Result<FactoredObservation> {
            self.t = 0;
            Ok(self.obs())
        }
        fn step(&mut self, _: &[f64]) -> Result<Step> {
            let hit = self.t == self.pay_at;
            self.t += 1;
            Ok(Step {
                obs: self.obs(),
                reward: if hit { self.reward } else { 0.0 },
                done: hit && self.stop,
                success: hit,
            })
        }
        fn state(&self) -> &PointRobotState {
            &self.state
        }
    }

    fn skills(seed: u64) -> SkillSet {
        let mut rng = RngStream::new(seed, 0);
        SkillSet::Snn(SnnPolicy::new(4, 2, 3, Integration::Bilinear, MlpSpec::new(vec![8]), &mut rng).unwrap())
    }

    fn manager(obs_dim: usize) -> ManagerPolicy {
        ManagerPolicy::zeros(obs_dim, 3, MlpSpec::new(vec![8])).unwrap()
    }

    #[test]
    fn windows_follow_switch_time() {
        let mut env = Scripted::new(usize::MAX, 0.0, false);
        let m = hierarchical_rollout(&manager(5), &skills(0), &mut env, 3, 7, &RngStream::new(0, 0)).unwrap();
        assert_eq!(m.window_lengths, vec![3, 3, 1]);
        assert_eq!(m.skills.len(), 3);
        // manager saw the observation at t = 0, 3, 6
        let times: Vec<f64> = m.observations.iter().map(|o| o[4]).collect();
        assert_eq!(times, vec![0.0, 3.0, 6.0]);
    }

    #[test]
    fn switch_time_equal_to_horizon_gives_one_macro_step() {
        let mut env = Scripted::new(usize::MAX, 0.0, false);
        let m = hierarchical_rollout(&manager(5), &skills(0), &mut env, 7, 7, &RngStream::new(0, 0)).unwrap();
        assert_eq!(m.window_lengths, vec![7]);
    }

    #[test]
    fn sparse_reward_credited_to_its_window() {
        let mut env = Scripted::new(4, 2.5, true);
        let m = hierarchical_rollout(&manager(5), &skills(0), &mut env, 3, 12, &RngStream::new(0, 0)).unwrap();
        assert_eq!(m.rewards, vec![0.0, 2.5]);
        assert_eq!(m.window_lengths, vec![3, 2]);
        assert!(m.success && m.reward_conserved());
    }

    #[test]
    fn bad_switch_time_rejected() {
        let mut env = Scripted::new(0, 0.0, false);
        assert!(hierarchical_rollout(&manager(5), &skills(0), &mut env, 0, 7, &RngStream::new(0, 0)).is_err());
        assert!(hierarchical_rollout(&manager(5), &skills(0), &mut env, 8, 7, &RngStream::new(0, 0)).is_err());
    }

    fn small_config(env: EnvConfig, switch_time: usize) -> DownstreamConfig {
        DownstreamConfig {
            env,
            switch_time,
            batch_size: 600,
            horizon: 100,
            n_iterations: 10,
            manager: MlpSpec::new(vec![8]),
            eval_episodes: 3,
            eval_every: 5,
            ..Default::default()
        }
    }

    #[test]
    fn skills_stay_frozen_and_rewards_conserve() {
        let s = skills(1);
        let before = s.parameters();
        for (env, rewarded) in [(EnvConfig::maze(0).unwrap(), false), (EnvConfig::gather(), true)] {
            let cfg = small_config(env, 10);
            let mut state = DownstreamState::new(&cfg, &s).unwrap();
            let m0 = state.manager.params.clone();
            for _ in 0..cfg.n_iterations {
                let m = downstream_iteration(&mut state, &s, &cfg).unwrap();
                assert!(m.reward_conserved);
                assert!(m.timesteps >= cfg.batch_size);
                assert_eq!(s.parameters(), before);
            }
            // sparse maze reward is never reached by random skills: no signal
            assert_eq!(state.manager.params != m0, rewarded);
        }
    }

    #[test]
    fn multipolicy_bank_drives_the_maze() {
        let mut rng = RngStream::new(5, 0);
        let bank = SkillSet::Multi(
            (0..3)
                .map(|_| SnnPolicy::plain(4, 2, MlpSpec::new(vec![8]), &mut rng).unwrap())
                .collect(),
        );
        let cfg = small_config(EnvConfig::maze(0).unwrap(), 20);
        let mut state = DownstreamState::new(&cfg, &bank).unwrap();
        let m = downstream_iteration(&mut state, &bank, &cfg).unwrap();
        assert!(m.reward_conserved);
    }

    #[test]
    fn skill_dimension_mismatch_rejected() {
        let mut rng = RngStream::new(5, 0);
        let wrong = SkillSet::Snn(SnnPolicy::new(5, 2, 3, Integration::Concat, MlpSpec::new(vec![4]), &mut rng).unwrap());
        assert!(DownstreamState::new(&small_config(EnvConfig::maze(0).unwrap(), 10), &wrong).is_err());
    }

    #[test]
    fn flat_baseline_runs_and_evaluates() {
        let cfg = small_config(EnvConfig::maze(0).unwrap(), 10);
        let mut state = FlatState::new(&cfg, MlpSpec::new(vec![8])).unwrap();
        let mut evals = 0;
        for _ in 0..5 {
            let m = flat_iteration(&mut state, &cfg).unwrap();
            evals += usize::from(m.eval.is_some());
            // the proxy term makes every training return positive
            assert!(m.mean_return > 0.0);
        }
        assert_eq!(evals, 1);
    }

    #[test]
    fn downstream_is_deterministic() {
        let s = skills(2);
        let cfg = small_config(EnvConfig::gather(), 10);
        let run = || {
            let mut st = DownstreamState::new(&cfg, &s).unwrap();
            for _ in 0..3 {
                downstream_iteration(&mut st, &s, &cfg).unwrap();
            }
            st.manager.params
        };
        assert_eq!(run(), run());
    }
}
