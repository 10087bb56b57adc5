//! Count-based mutual-information bonus over discretized robot positions.
//!
//! Each batch, positions are binned into square cells and visits are counted
//! per latent code. The empirical posterior `p(z | c) = m_c(z) / sum m_c(z')`
//! then modifies every reward as `R + alpha_h * ln p(z | c)`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::base::{TrajectoryBatch, Vec2};
use crate::error::{check_finite, Error, Result};

pub type Cell = (i64, i64);

pub const DEFAULT_MESH_DENSITY: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiConfig {
    pub alpha_h: f64,
    pub posterior_floor: f64,
}

impl Default for MiConfig {
    fn default() -> Self {
        Self {
            alpha_h: 0.0,
            posterior_floor: 1e-3,
        }
    }
}

impl MiConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.alpha_h.is_finite() && self.alpha_h >= 0.0) {
            return Err(Error::Config {
                field: "mi.alpha_h".into(),
                constraint: "must be finite and >= 0".into(),
            });
        }
        if !(self.posterior_floor > 0.0 && self.posterior_floor < 1.0 / k as f64) {
            return Err(Error::Config {
                field: "mi.posterior_floor".into(),
                constraint: format!("must lie in (0, 1/K) with K = {k}"),
            });
        }
        Ok(())
    }
}

/// Cell containing `com`: `(floor(x * density), floor(y * density))`.
pub fn cell_of(com: Vec2, mesh_density: f64) -> Result<Cell> {
    check_finite("position", &com)?;
    Ok((
        (com[0] * mesh_density).floor() as i64,
        (com[1] * mesh_density).floor() as i64,
    ))
}

/// Per-cell visit counts split by latent code.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitationGrid {
    pub mesh_density: f64,
    pub k: usize,
    pub counts: BTreeMap<Cell, Vec<u64>>,
}

impl VisitationGrid {
    pub fn new(mesh_density: f64, k: usize) -> Self {
        Self {
            mesh_density,
            k,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, com: Vec2, z: usize) -> Result<()> {
        if z >= self.k {
            return Err(Error::LatentOutOfRange { latent: z, k: self.k });
        }
        let cell = cell_of(com, self.mesh_density)?;
        self.counts.entry(cell).or_insert_with(|| vec![0; self.k])[z] += 1;
        Ok(())
    }

    /// Associative merge of another grid's counts.
    pub fn merge(&mut self, other: &VisitationGrid) {
        for (cell, c) in &other.counts {
            let e = self.counts.entry(*cell).or_insert_with(|| vec![0; self.k]);
            for (a, b) in e.iter_mut().zip(c) {
                *a += b;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flatten().sum()
    }

    pub fn cell_total(&self, cell: Cell) -> u64 {
        self.counts.get(&cell).map_or(0, |c| c.iter().sum())
    }

    /// Count ratio without flooring; `None` for an unvisited cell.
    pub fn raw_posterior(&self, cell: Cell, z: usize) -> Option<f64> {
        let c = self.counts.get(&cell)?;
        let total: u64 = c.iter().sum();
        if total == 0 {
            return None;
        }
        Some(c[z] as f64 / total as f64)
    }

    /// Count-ratio posterior, floored at `floor` (also for unvisited cells).
    pub fn posterior(&self, cell: Cell, z: usize, floor: f64) -> f64 {
        match self.raw_posterior(cell, z) {
            Some(p) if p >= floor => p,
            _ => floor,
        }
    }

    /// CSV rows `cell_x,cell_y,count_z0..count_z{K-1}`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let header: Vec<String> = ["cell_x".to_string(), "cell_y".to_string()]
            .into_iter()
            .chain((0..self.k).map(|z| format!("count_z{z}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for ((x, y), c) in &self.counts {
            let counts: Vec<String> = c.iter().map(u64::to_string).collect();
            writeln!(w, "{x},{y},{}", counts.join(","))?;
        }
        Ok(())
    }
}

/// Fresh grid from every timestep of the batch.
pub fn accumulate(batch: &TrajectoryBatch, mesh_density: f64, k: usize) -> Result<VisitationGrid> {
    let mut grid = VisitationGrid::new(mesh_density, k);
    for traj in &batch.trajectories {
        if traj.latent >= k {
            return Err(Error::LatentOutOfRange {
                latent: traj.latent,
                k,
            });
        }
        for &com in &traj.com_positions {
            grid.add(com, traj.latent)?;
        }
    }
    Ok(grid)
}

/// Replace every reward with `R + alpha_h * ln p(z | c)`; `raw_rewards` are
/// left untouched.
pub fn apply_mi_bonus(
    mut batch: TrajectoryBatch,
    grid: &VisitationGrid,
    config: &MiConfig,
) -> Result<TrajectoryBatch> {
    if config.alpha_h == 0.0 {
        return Ok(batch);
    }
    for traj in &mut batch.trajectories {
        for (r, &com) in traj.rewards.iter_mut().zip(&traj.com_positions) {
            let cell = cell_of(com, grid.mesh_density)?;
            let p = grid.posterior(cell, traj.latent, config.posterior_floor);
            *r += config.alpha_h * p.ln();
        }
    }
    Ok(batch)
}
