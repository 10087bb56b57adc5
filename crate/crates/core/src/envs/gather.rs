use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::{Dynamics, PointRobotState};
use super::geometry::{norm2, resolve_motion, sub, WallSegment};
use super::sensors::{SensorConfig, SensorTarget};
use super::sense;
use crate::base::{FactoredObservation, ObsLayout, RngStream, Vec2};
use crate::error::{Error, Result};

pub const SPAWN_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatherSpec {
    pub arena_half_size: f64,
    pub n_green: usize,
    pub n_red: usize,
    pub ball_radius: f64,
    pub robot_radius: f64,
    pub min_spawn_dist: f64,
}

impl Default for GatherSpec {
    fn default() -> Self {
        Self {
            arena_half_size: 6.0,
            n_green: 4,
            n_red: 4,
            ball_radius: 0.3,
            robot_radius: 0.2,
            min_spawn_dist: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub position: Vec2,
    pub green: bool,
}

impl GatherSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, constraint: &str| {
            Err(Error::Config {
                field: field.into(),
                constraint: constraint.into(),
            })
        };
        if self.n_green == 0 {
            return bad("gather.n_green", "must be at least 1");
        }
        if self.n_red == 0 {
            return bad("gather.n_red", "must be at least 1");
        }
        if !(self.ball_radius > 0.0 && self.robot_radius >= 0.0) {
            return bad("gather.ball_radius", "radii must be positive");
        }
        if !(self.arena_half_size > self.ball_radius) {
            return bad("gather.arena_half_size", "must exceed the ball radius");
        }
        if !(self.min_spawn_dist >= 0.0) {
            return bad("gather.min_spawn_dist", "must be non-negative");
        }
        Ok(())
    }

    pub fn walls(&self) -> Vec<WallSegment> {
        let h = self.arena_half_size;
        vec![
            WallSegment::new([-h, -h], [h, -h]),
            WallSegment::new([h, -h], [h, h]),
            WallSegment::new([h, h], [-h, h]),
            WallSegment::new([-h, h], [-h, -h]),
        ]
    }

    pub fn default_sensors() -> SensorConfig {
        SensorConfig {
            n_rays: 8,
            max_range: 8.0,
            targets: vec![SensorTarget::Green, SensorTarget::Red, SensorTarget::Walls],
        }
    }

    /// Rejection-sample a ball layout: every ball at least `min_spawn_dist`
    /// from the robot and non-overlapping with the others.
    pub fn spawn(&self, robot: Vec2, rng: &mut RngStream) -> Result<Vec<Ball>> {
        let lim = self.arena_half_size - self.ball_radius;
        let mut balls: Vec<Ball> = Vec::with_capacity(self.n_green + self.n_red);
        for i in 0..self.n_green + self.n_red {
            let mut placed = false;
            for _ in 0..SPAWN_ATTEMPTS {
                let p = [rng.random_range(-lim..=lim), rng.random_range(-lim..=lim)];
                if norm2(sub(p, robot)) < self.min_spawn_dist {
                    continue;
                }
                if balls
                    .iter()
                    .any(|b| norm2(sub(p, b.position)) < 2.0 * self.ball_radius)
                {
                    continue;
                }
                balls.push(Ball {
                    position: p,
                    green: i < self.n_green,
                });
                placed = true;
                break;
            }
            if !placed {
                return Err(Error::SpawnFailure {
                    ball: i,
                    attempts: SPAWN_ATTEMPTS,
                });
            }
        }
        Ok(balls)
    }
}

/// One gather step. Balls within contact distance of the new position are
/// consumed: +1 per green, -1 per red. Done once no green ball remains.
pub fn gather_step(
    state: &PointRobotState,
    action: &[f64],
    spec: &GatherSpec,
    balls: &mut Vec<Ball>,
    dynamics: &Dynamics,
    sensors: &SensorConfig,
    walls: &[WallSegment],
    layout: &Arc<ObsLayout>,
) -> Result<(PointRobotState, f64, FactoredObservation, bool)> {
    let v = dynamics.next_velocity(state.velocity, action)?;
    let contact = resolve_motion(state.position, v, walls, dynamics.contact_epsilon);
    let next = state.with_motion(contact.position, contact.velocity);
    let reach = spec.ball_radius + spec.robot_radius;
    let mut reward = 0.0;
    balls.retain(|b| {
        if norm2(sub(b.position, next.position)) <= reach {
            reward += if b.green { 1.0 } else { -1.0 };
            false
        } else {
            true
        }
    });
    let done = !balls.iter().any(|b| b.green);
    let obs = sense(&next, dynamics, sensors, walls, None, balls, layout);
    Ok((next, reward, obs, done))
}
