//! Deterministic 2D surrogate environments.
//!
//! All arenas share the damped point-robot dynamics in [`dynamics`]. The free
//! pre-training arena rewards speed; mazes pay a sparse unit reward at the
//! goal; the gather arena pays +1 / -1 for green / red balls.

pub mod dynamics;
pub mod gather;
pub mod geometry;
pub mod maze;
pub mod sensors;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::base::{FactoredObservation, ObsLayout, RngStream, Vec2};
use crate::error::Result;

pub use dynamics::{agent_observation, pretrain_step, Dynamics, PointRobotState, AGENT_DIM};
pub use gather::{gather_step, Ball, GatherSpec};
pub use geometry::{raycast, WallSegment};
pub use maze::{maze_step, MazeSpec};
pub use sensors::{SensorConfig, SensorTarget};

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: FactoredObservation,
    pub reward: f64,
    pub done: bool,
    /// Task solved on this step (maze goal reached).
    pub success: bool,
}

/// A single-threaded environment instance.
pub trait Environment: Send {
    fn layout(&self) -> Arc<ObsLayout>;
    fn reset(&mut self, rng: &mut RngStream) -> Result<FactoredObservation>;
    fn step(&mut self, action: &[f64]) -> Result<Step>;
    fn state(&self) -> &PointRobotState;

    fn com(&self) -> Vec2 {
        self.state().position
    }

    fn action_dim(&self) -> usize {
        2
    }
}

/// Observation layout for an arena with the given sensor banks.
pub fn arena_layout(sensors: &SensorConfig) -> Arc<ObsLayout> {
    let rest = sensors
        .targets
        .iter()
        .map(|t| (format!("{t:?}").to_lowercase(), sensors.n_rays))
        .collect();
    Arc::new(ObsLayout::new(dynamics::agent_fields(), rest))
}

pub(crate) fn sense(
    state: &PointRobotState,
    dynamics: &Dynamics,
    sensors: &SensorConfig,
    walls: &[WallSegment],
    goal: Option<(Vec2, f64)>,
    balls: &[Ball],
    layout: &Arc<ObsLayout>,
) -> FactoredObservation {
    let mut rest = Vec::with_capacity(sensors.dim());
    let (p, h) = (state.position, state.heading);
    for target in &sensors.targets {
        let bank = match target {
            SensorTarget::Walls => sensors.wall_readings(p, h, walls),
            SensorTarget::Goal => sensors.object_readings(p, h, goal, Some(walls)),
            SensorTarget::Green | SensorTarget::Red => {
                let green = *target == SensorTarget::Green;
                let objects = balls
                    .iter()
                    .filter(|b| b.green == green)
                    .map(|b| (b.position, 0.0));
                sensors.object_readings(p, h, objects, None)
            }
        };
        rest.extend(bank);
    }
    FactoredObservation::new(agent_observation(state, dynamics), rest, layout.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvKind {
    Pretrain,
    Maze {
        spec: MazeSpec,
        sensors: SensorConfig,
    },
    Gather {
        spec: GatherSpec,
        sensors: SensorConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub task: EnvKind,
    #[serde(default)]
    pub dynamics: Dynamics,
    /// Weight of the speed reward added on top of the task reward.
    #[serde(default)]
    pub com_proxy_coef: f64,
}

impl EnvConfig {
    pub fn pretrain() -> Self {
        Self {
            task: EnvKind::Pretrain,
            dynamics: Dynamics::default(),
            com_proxy_coef: 0.0,
        }
    }

    pub fn maze(id: u8) -> Result<Self> {
        Ok(Self {
            task: EnvKind::Maze {
                spec: MazeSpec::desk(id)?,
                sensors: MazeSpec::default_sensors(),
            },
            dynamics: Dynamics::default(),
            com_proxy_coef: 0.0,
        })
    }

    pub fn gather() -> Self {
        Self {
            task: EnvKind::Gather {
                spec: GatherSpec::default(),
                sensors: GatherSpec::default_sensors(),
            },
            dynamics: Dynamics::default(),
            com_proxy_coef: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        match &self.task {
            EnvKind::Pretrain => Ok(()),
            EnvKind::Maze { spec, .. } => spec.validate(),
            EnvKind::Gather { spec, .. } => spec.validate(),
        }
    }

    pub fn layout(&self) -> Arc<ObsLayout> {
        match &self.task {
            EnvKind::Pretrain => dynamics::pretrain_layout(),
            EnvKind::Maze { sensors, .. } | EnvKind::Gather { sensors, .. } => arena_layout(sensors),
        }
    }

    pub fn build(&self) -> Box<dyn Environment> {
        let dynamics = self.dynamics;
        let coef = self.com_proxy_coef;
        let layout = self.layout();
        match &self.task {
            EnvKind::Pretrain => Box::new(PretrainEnv {
                dynamics,
                layout,
                state: PointRobotState::at([0.0, 0.0]),
            }),
            EnvKind::Maze { spec, sensors } => Box::new(MazeEnv {
                spec: spec.clone(),
                sensors: sensors.clone(),
                dynamics,
                layout,
                com_proxy_coef: coef,
                state: PointRobotState::at(spec.start),
            }),
            EnvKind::Gather { spec, sensors } => Box::new(GatherEnv {
                walls: spec.walls(),
                spec: spec.clone(),
                sensors: sensors.clone(),
                dynamics,
                layout,
                com_proxy_coef: coef,
                state: PointRobotState::at([0.0, 0.0]),
                balls: Vec::new(),
            }),
        }
    }
}

/// Free arena with the speed-norm proxy reward.
#[derive(Debug, Clone)]
pub struct PretrainEnv {
    pub dynamics: Dynamics,
    layout: Arc<ObsLayout>,
    state: PointRobotState,
}

impl PretrainEnv {
    pub fn new(dynamics: Dynamics) -> Self {
        Self {
            dynamics,
            layout: dynamics::pretrain_layout(),
            state: PointRobotState::at([0.0, 0.0]),
        }
    }
}

impl Environment for PretrainEnv {
    fn layout(&self) -> Arc<ObsLayout> {
        self.layout.clone()
    }

    /// Always the origin, at rest, heading 0.
    fn reset(&mut self, _rng: &mut RngStream) -> Result<FactoredObservation> {
        self.state = PointRobotState::at([0.0, 0.0]);
        Ok(FactoredObservation::new(
            agent_observation(&self.state, &self.dynamics),
            Vec::new(),
            self.layout.clone(),
        ))
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let (state, reward, obs) = pretrain_step(&self.state, action, &self.dynamics, &self.layout)?;
        self.state = state;
        Ok(Step {
            obs,
            reward,
            done: false,
            success: false,
        })
    }

    fn state(&self) -> &PointRobotState {
        &self.state
    }
}

#[derive(Debug, Clone)]
pub struct MazeEnv {
    pub spec: MazeSpec,
    pub sensors: SensorConfig,
    pub dynamics: Dynamics,
    layout: Arc<ObsLayout>,
    com_proxy_coef: f64,
    state: PointRobotState,
}

impl MazeEnv {
    pub fn observe(&self) -> FactoredObservation {
        sense(
            &self.state,
            &self.dynamics,
            &self.sensors,
            &self.spec.walls,
            Some((self.spec.goal, self.spec.goal_radius)),
            &[],
            &self.layout,
        )
    }
}

impl Environment for MazeEnv {
    fn layout(&self) -> Arc<ObsLayout> {
        self.layout.clone()
    }

    fn reset(&mut self, _rng: &mut RngStream) -> Result<FactoredObservation> {
        self.state = PointRobotState::at(self.spec.start);
        Ok(self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let (state, reward, obs, done) = maze_step(
            &self.state,
            action,
            &self.spec,
            &self.dynamics,
            &self.sensors,
            &self.layout,
        )?;
        self.state = state;
        Ok(Step {
            obs,
            reward: reward + self.com_proxy_coef * state.speed(),
            done,
            success: done,
        })
    }

    fn state(&self) -> &PointRobotState {
        &self.state
    }
}

#[derive(Debug, Clone)]
pub struct GatherEnv {
    pub spec: GatherSpec,
    pub sensors: SensorConfig,
    pub dynamics: Dynamics,
    walls: Vec<WallSegment>,
    layout: Arc<ObsLayout>,
    com_proxy_coef: f64,
    state: PointRobotState,
    balls: Vec<Ball>,
}

impl GatherEnv {
    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }
}

impl Environment for GatherEnv {
    fn layout(&self) -> Arc<ObsLayout> {
        self.layout.clone()
    }

    fn reset(&mut self, rng: &mut RngStream) -> Result<FactoredObservation> {
        self.state = PointRobotState::at([0.0, 0.0]);
        self.balls = self.spec.spawn(self.state.position, rng)?;
        Ok(sense(
            &self.state,
            &self.dynamics,
            &self.sensors,
            &self.walls,
            None,
            &self.balls,
            &self.layout,
        ))
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let (state, reward, obs, done) = gather_step(
            &self.state,
            action,
            &self.spec,
            &mut self.balls,
            &self.dynamics,
            &self.sensors,
            &self.walls,
            &self.layout,
        )?;
        self.state = state;
        Ok(Step {
            obs,
            reward: reward + self.com_proxy_coef * state.speed(),
            done,
            success: false,
        })
    }

    fn state(&self) -> &PointRobotState {
        &self.state
    }
}
