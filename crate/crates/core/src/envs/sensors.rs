use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::geometry::{raycast, WallSegment};
use crate::base::Vec2;

/// Object classes a sensor bank can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorTarget {
    Walls,
    Goal,
    Green,
    Red,
}

/// Egocentric range sensors: `n_rays` directions evenly spaced around the
/// heading, ray 0 pointing along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub n_rays: usize,
    pub max_range: f64,
    pub targets: Vec<SensorTarget>,
}

impl SensorConfig {
    pub fn dim(&self) -> usize {
        self.n_rays * self.targets.len()
    }

    pub fn ray_angle(&self, heading: f64, i: usize) -> f64 {
        heading + TAU * i as f64 / self.n_rays as f64
    }

    pub fn reading(&self, distance: f64) -> f64 {
        if distance >= self.max_range {
            0.0
        } else {
            (self.max_range - distance.max(0.0)) / self.max_range
        }
    }

    /// Ray-cast wall readings in `[0, 1]`.
    pub fn wall_readings(&self, origin: Vec2, heading: f64, walls: &[WallSegment]) -> Vec<f64> {
        (0..self.n_rays)
            .map(|i| self.reading(raycast(origin, self.ray_angle(heading, i), walls, self.max_range)))
            .collect()
    }

    /// Readings for round objects. Each ray reports the nearest object whose
    /// bearing falls in its angular sector (width `2π / n_rays`); the distance
    /// is to the object's rim. With `occluders`, objects hidden behind a
    /// closer wall are not reported.
    pub fn object_readings<'a>(
        &self,
        origin: Vec2,
        heading: f64,
        objects: impl IntoIterator<Item = (Vec2, f64)>,
        occluders: Option<&'a [WallSegment]>,
    ) -> Vec<f64> {
        let mut out = vec![0.0f64; self.n_rays];
        let sector = TAU / self.n_rays as f64;
        for (center, radius) in objects {
            let rel = [center[0] - origin[0], center[1] - origin[1]];
            let center_dist = rel[0].hypot(rel[1]);
            let dist = (center_dist - radius).max(0.0);
            if dist >= self.max_range {
                continue;
            }
            let bearing = rel[1].atan2(rel[0]);
            if let Some(walls) = occluders {
                if raycast(origin, bearing, walls, center_dist) < dist {
                    continue;
                }
            }
            let idx = ((bearing - heading) / sector).round().rem_euclid(self.n_rays as f64) as usize
                % self.n_rays;
            out[idx] = out[idx].max(self.reading(dist));
        }
        out
    }
}
