use super::{FactoredObservation, Vec2};
use crate::error::{Error, Result};

/// One low-level rollout with a single latent code held for its whole length.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<FactoredObservation>,
    pub actions: Vec<Vec<f64>>,
    /// Rewards fed to the optimizer (possibly MI-modified).
    pub rewards: Vec<f64>,
    /// Environment rewards as collected.
    pub raw_rewards: Vec<f64>,
    pub latent: usize,
    pub log_probs: Vec<f64>,
    /// Robot position after each step.
    pub com_positions: Vec<Vec2>,
}

impl Trajectory {
    pub fn with_capacity(latent: usize, capacity: usize) -> Self {
        Self {
            observations: Vec::with_capacity(capacity),
            actions: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            raw_rewards: Vec::with_capacity(capacity),
            latent,
            log_probs: Vec::with_capacity(capacity),
            com_positions: Vec::with_capacity(capacity),
        }
    }

    pub fn push(
        &mut self,
        obs: FactoredObservation,
        action: Vec<f64>,
        reward: f64,
        log_prob: f64,
        com: Vec2,
    ) {
        self.observations.push(obs);
        self.actions.push(action);
        self.rewards.push(reward);
        self.raw_rewards.push(reward);
        self.log_probs.push(log_prob);
        self.com_positions.push(com);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Checks the equal-length and horizon invariants.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        let l = self.rewards.len();
        let lens = [
            self.observations.len(),
            self.actions.len(),
            self.raw_rewards.len(),
            self.log_probs.len(),
            self.com_positions.len(),
        ];
        if let Some(&bad) = lens.iter().find(|&&n| n != l) {
            return Err(Error::Dimension {
                what: "trajectory sequence",
                expected: l,
                got: bad,
            });
        }
        if l == 0 || l > horizon {
            return Err(Error::InvalidArgument(format!(
                "trajectory length {l} outside [1, {horizon}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryBatch {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryBatch {
    pub fn new(trajectories: Vec<Trajectory>) -> Self {
        Self { trajectories }
    }

    pub fn timesteps(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Mean undiscounted environment return per rollout.
    pub fn mean_raw_return(&self) -> f64 {
        if self.trajectories.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .trajectories
            .iter()
            .map(|t| t.raw_rewards.iter().sum::<f64>())
            .sum();
        total / self.trajectories.len() as f64
    }
}
