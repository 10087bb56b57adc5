use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dynamics::{Dynamics, PointRobotState};
use super::geometry::{norm2, resolve_motion, sub, WallSegment};
use super::sensors::{SensorConfig, SensorTarget};
use super::{sense, Ball};
use crate::base::{FactoredObservation, ObsLayout, Vec2};
use crate::error::{Error, Result};

/// Corridor width of the desk-scale mazes; one grid cell per corridor square.
pub const CELL: f64 = 2.0;
pub const DESK_GOAL_RADIUS: f64 = 0.4;
/// Goal offset from the cell centre towards a dead-end corner.
const CORNER_OFFSET: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeSpec {
    pub id: u8,
    pub walls: Vec<WallSegment>,
    pub start: Vec2,
    pub goal: Vec2,
    pub goal_radius: f64,
}

/// Build wall segments around the free cells of a character grid.
///
/// Rows are given top to bottom; `S` marks the start cell, which becomes the
/// origin, and any of `.`, `S`, `G` is free space.
fn walls_from_grid(rows: &[&str]) -> Vec<WallSegment> {
    let grid: Vec<Vec<char>> = rows.iter().rev().map(|r| r.chars().collect()).collect();
    let (sx, sy) = grid
        .iter()
        .enumerate()
        .find_map(|(y, row)| row.iter().position(|&c| c == 'S').map(|x| (x, y)))
        .expect("grid has a start cell");
    let free = |x: isize, y: isize| -> bool {
        if x < 0 || y < 0 {
            return false;
        }
        grid.get(y as usize)
            .and_then(|row| row.get(x as usize))
            .is_some_and(|&c| c != '#')
    };
    let mut walls = Vec::new();
    for (y, row) in grid.iter().enumerate() {
        for x in 0..row.len() {
            let (xi, yi) = (x as isize, y as isize);
            if !free(xi, yi) {
                continue;
            }
            let cx = (x as f64 - sx as f64) * CELL;
            let cy = (y as f64 - sy as f64) * CELL;
            let h = CELL / 2.0;
            let (x0, x1, y0, y1) = (cx - h, cx + h, cy - h, cy + h);
            if !free(xi - 1, yi) {
                walls.push(WallSegment::new([x0, y0], [x0, y1]));
            }
            if !free(xi + 1, yi) {
                walls.push(WallSegment::new([x1, y0], [x1, y1]));
            }
            if !free(xi, yi - 1) {
                walls.push(WallSegment::new([x0, y0], [x1, y0]));
            }
            if !free(xi, yi + 1) {
                walls.push(WallSegment::new([x0, y1], [x1, y1]));
            }
        }
    }
    walls
}

impl MazeSpec {
    /// Desk-scale mazes. 0 and 1 are mirror-image U-turns; 2 and 3 share a
    /// T layout with the goal in opposite top corners.
    pub fn desk(id: u8) -> Result<Self> {
        let c = CORNER_OFFSET;
        let (rows, goal): (&[&str], Vec2) = match id {
            0 => (&["G..", "##.", "S.."], [-c, 2.0 * CELL + c]),
            1 => (&["..G", ".##", "..S"], [c, 2.0 * CELL + c]),
            2 => (&[".....", "##.##", "##S##"], [-2.0 * CELL - c, 2.0 * CELL + c]),
            3 => (&[".....", "##.##", "##S##"], [2.0 * CELL + c, 2.0 * CELL + c]),
            _ => {
                return Err(Error::Config {
                    field: "maze.id".into(),
                    constraint: format!("{id} not in {{0, 1, 2, 3}}"),
                })
            }
        };
        let spec = Self {
            id,
            walls: walls_from_grid(rows),
            start: [0.0, 0.0],
            goal,
            goal_radius: DESK_GOAL_RADIUS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, constraint: String| {
            Err(Error::Config {
                field: field.into(),
                constraint,
            })
        };
        if self.walls.is_empty() {
            return bad("maze.walls", "at least one wall required".into());
        }
        if let Some(i) = self.walls.iter().position(WallSegment::is_degenerate) {
            return bad("maze.walls", format!("segment {i} has equal endpoints"));
        }
        if !(self.goal_radius > 0.0) {
            return bad("maze.goal_radius", "must be positive".into());
        }
        for (name, p) in [("maze.start", self.start), ("maze.goal", self.goal)] {
            if self.walls.iter().any(|w| w.distance_to(p) < 1e-6) {
                return bad(name, "lies on a wall".into());
            }
        }
        Ok(())
    }

    /// Reflection about the y-axis.
    pub fn mirror_x(&self) -> Self {
        Self {
            id: self.id,
            walls: self.walls.iter().map(WallSegment::mirror_x).collect(),
            start: [-self.start[0], self.start[1]],
            goal: [-self.goal[0], self.goal[1]],
            goal_radius: self.goal_radius,
        }
    }

    pub fn default_sensors() -> SensorConfig {
        SensorConfig {
            n_rays: 8,
            max_range: 6.0,
            targets: vec![SensorTarget::Walls, SensorTarget::Goal],
        }
    }

    pub fn reached(&self, p: Vec2) -> bool {
        norm2(sub(p, self.goal)) <= self.goal_radius
    }
}

/// One maze step: point-robot dynamics with sliding wall contact and a
/// sparse unit reward on reaching the goal.
pub fn maze_step(
    state: &PointRobotState,
    action: &[f64],
    spec: &MazeSpec,
    dynamics: &Dynamics,
    sensors: &SensorConfig,
    layout: &Arc<ObsLayout>,
) -> Result<(PointRobotState, f64, FactoredObservation, bool)> {
    let v = dynamics.next_velocity(state.velocity, action)?;
    let contact = resolve_motion(state.position, v, &spec.walls, dynamics.contact_epsilon);
    let next = state.with_motion(contact.position, contact.velocity);
    let done = spec.reached(next.position);
    let reward = if done { 1.0 } else { 0.0 };
    let obs = sense(
        &next,
        dynamics,
        sensors,
        &spec.walls,
        Some((spec.goal, spec.goal_radius)),
        &[] as &[Ball],
        layout,
    );
    Ok((next, reward, obs, done))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::dynamics::pretrain_step;
    use crate::envs::{arena_layout, dynamics::pretrain_layout};

    fn run(spec: &MazeSpec, state: PointRobotState, action: [f64; 2]) -> (PointRobotState, f64, bool) {
        let sensors = MazeSpec::default_sensors();
        let layout = arena_layout(&sensors);
        let (s, r, _, d) =
            maze_step(&state, &action, spec, &Dynamics::default(), &sensors, &layout).unwrap();
        (s, r, d)
    }

    #[test]
    fn desk_mazes_validate() {
        for id in 0..4 {
            let m = MazeSpec::desk(id).unwrap();
            assert_eq!(m.start, [0.0, 0.0]);
            assert!(!m.reached(m.start));
        }
        assert!(MazeSpec::desk(4).is_err());
    }

    #[test]
    fn maze_one_mirrors_maze_zero() {
        let m0 = MazeSpec::desk(0).unwrap().mirror_x();
        let m1 = MazeSpec::desk(1).unwrap();
        assert_eq!(m0.goal, m1.goal);
        let key = |w: &WallSegment| {
            let (mut a, mut b) = (w.a, w.b);
            if (a[0], a[1]) > (b[0], b[1]) {
                std::mem::swap(&mut a, &mut b);
            }
            format!("{a:?}{b:?}")
        };
        let mut k0: Vec<_> = m0.walls.iter().map(key).collect();
        let mut k1: Vec<_> = m1.walls.iter().map(key).collect();
        k0.sort();
        k1.sort();
        assert_eq!(k0, k1);
    }

    #[test]
    fn mazes_two_and_three_share_walls() {
        let a = MazeSpec::desk(2).unwrap();
        let b = MazeSpec::desk(3).unwrap();
        assert_eq!(a.walls, b.walls);
        assert_eq!(a.goal[0], -b.goal[0]);
        assert_eq!(a.goal[1], b.goal[1]);
    }

    #[test]
    fn goal_reached_at_centre() {
        let spec = MazeSpec::desk(0).unwrap();
        let (s, r, d) = run(&spec, PointRobotState::at(spec.goal), [0.0, 0.0]);
        assert_eq!(s.position, spec.goal);
        assert_eq!(r, 1.0);
        assert!(d);
    }

    #[test]
    fn open_space_matches_free_dynamics() {
        let spec = MazeSpec::desk(0).unwrap();
        let start = PointRobotState::at([0.0, 0.0]);
        let (s, r, d) = run(&spec, start, [0.7, -0.3]);
        let (free, _, _) =
            pretrain_step(&start, &[0.7, -0.3], &Dynamics::default(), &pretrain_layout()).unwrap();
        assert_eq!(s, free);
        assert_eq!(r, 0.0);
        assert!(!d);
    }

    #[test]
    fn head_on_wall_contact() {
        // Left wall of the start cell is x = -1.
        let spec = MazeSpec::desk(0).unwrap();
        let mut state = PointRobotState::at([-0.99, 0.0]);
        state.velocity = [-0.1 / 0.9, 0.0];
        let (s, _, _) = run(&spec, state, [0.0, 0.0]);
        let eps = Dynamics::default().contact_epsilon;
        assert!((s.position[0] - (-1.0 + eps)).abs() < 1e-12, "{:?}", s.position);
        assert_eq!(s.velocity[0], 0.0);
    }

    #[test]
    fn pushing_into_dead_end_corner_reaches_goal() {
        let spec = MazeSpec::desk(0).unwrap();
        let mut state = PointRobotState::at([3.0, 4.0]);
        let mut reached = false;
        for _ in 0..100 {
            let (s, _, d) = run(&spec, state, [-1.0, 1.0]);
            state = s;
            if d {
                reached = true;
                break;
            }
        }
        assert!(reached, "ended at {:?}", state.position);
    }
}
