//! Damped point-robot dynamics shared by every arena.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::base::{FactoredObservation, ObsLayout, Vec2};
use crate::error::{check_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dynamics {
    /// Velocity damping per step.
    pub damping: f64,
    /// Velocity change per unit action.
    pub force_gain: f64,
    /// Speed cap in arena units per step.
    pub v_max: f64,
    /// Clearance kept from walls after a contact.
    pub contact_epsilon: f64,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self {
            damping: 0.1,
            force_gain: 0.1,
            v_max: 0.5,
            contact_epsilon: 1e-6,
        }
    }
}

impl Dynamics {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, constraint: &str| {
            Err(Error::Config {
                field: field.into(),
                constraint: constraint.into(),
            })
        };
        if !(0.0..=1.0).contains(&self.damping) {
            return bad("dynamics.damping", "must lie in [0, 1]");
        }
        if !(self.force_gain > 0.0 && self.force_gain.is_finite()) {
            return bad("dynamics.force_gain", "must be positive");
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return bad("dynamics.v_max", "must be positive");
        }
        if !(self.contact_epsilon > 0.0 && self.contact_epsilon < 1e-2) {
            return bad("dynamics.contact_epsilon", "must lie in (0, 0.01)");
        }
        Ok(())
    }

    /// Clip the action to `[-1, 1]`, apply damping and gain, then cap the speed.
    pub fn next_velocity(&self, velocity: Vec2, action: &[f64]) -> Result<Vec2> {
        if action.len() != 2 {
            return Err(Error::Dimension {
                what: "action",
                expected: 2,
                got: action.len(),
            });
        }
        check_finite("action", action)?;
        let a = [action[0].clamp(-1.0, 1.0), action[1].clamp(-1.0, 1.0)];
        let keep = 1.0 - self.damping;
        let v = [
            keep * velocity[0] + self.force_gain * a[0],
            keep * velocity[1] + self.force_gain * a[1],
        ];
        Ok(clamp_norm(v, self.v_max))
    }
}

pub fn clamp_norm(v: Vec2, max: f64) -> Vec2 {
    let n = v[0].hypot(v[1]);
    if n > max {
        let s = max / n;
        [v[0] * s, v[1] * s]
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRobotState {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Direction of travel in radians; held while the robot is at rest.
    pub heading: f64,
}

impl PointRobotState {
    pub fn at(position: Vec2) -> Self {
        Self {
            position,
            velocity: [0.0, 0.0],
            heading: 0.0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }

    pub(crate) fn with_motion(&self, position: Vec2, velocity: Vec2) -> Self {
        let heading = if velocity[0].hypot(velocity[1]) > 1e-9 {
            velocity[1].atan2(velocity[0])
        } else {
            self.heading
        };
        Self {
            position,
            velocity,
            heading,
        }
    }
}

pub const AGENT_DIM: usize = 4;

pub fn agent_fields() -> Vec<(String, usize)> {
    vec![("velocity".into(), 2), ("heading_cos_sin".into(), 2)]
}

/// Agent block: velocity scaled by `v_max`, heading as (cos, sin).
///
/// Position is deliberately absent so skills cannot key on the arena origin.
pub fn agent_observation(state: &PointRobotState, dynamics: &Dynamics) -> Vec<f64> {
    vec![
        state.velocity[0] / dynamics.v_max,
        state.velocity[1] / dynamics.v_max,
        state.heading.cos(),
        state.heading.sin(),
    ]
}

pub fn pretrain_layout() -> Arc<ObsLayout> {
    Arc::new(ObsLayout::new(agent_fields(), Vec::new()))
}

/// One step in the free pre-training arena. Reward is the speed norm.
pub fn pretrain_step(
    state: &PointRobotState,
    action: &[f64],
    dynamics: &Dynamics,
    layout: &Arc<ObsLayout>,
) -> Result<(PointRobotState, f64, FactoredObservation)> {
    let v = dynamics.next_velocity(state.velocity, action)?;
    let p = [state.position[0] + v[0], state.position[1] + v[1]];
    let next = state.with_motion(p, v);
    let reward = next.speed();
    let obs = FactoredObservation::new(
        agent_observation(&next, dynamics),
        Vec::new(),
        layout.clone(),
    );
    Ok((next, reward, obs))
}
