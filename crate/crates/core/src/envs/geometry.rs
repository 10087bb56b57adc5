//! Segment geometry: ray casting, swept-motion intersection and the sliding
//! contact response used by walled arenas.

use serde::{Deserialize, Serialize};

use crate::base::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub a: Vec2,
    pub b: Vec2,
}

impl WallSegment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        debug_assert!(a != b, "degenerate wall segment");
        Self { a, b }
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }

    pub fn mirror_x(&self) -> Self {
        Self {
            a: [-self.a[0], self.a[1]],
            b: [-self.b[0], self.b[1]],
        }
    }

    /// Euclidean distance from `p` to the closest point of the segment.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let d = sub(self.b, self.a);
        let len2 = dot2(d, d);
        let t = (dot2(sub(p, self.a), d) / len2).clamp(0.0, 1.0);
        let c = [self.a[0] + t * d[0], self.a[1] + t * d[1]];
        norm2(sub(p, c))
    }
}

pub(crate) fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn norm2(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

/// Tolerance on the wall parameter so that motion into the joint between two
/// segments is caught by at least one of them.
const JOINT_TOL: f64 = 1e-9;

/// Intersection of the motion `p + t * r` (t in [0, 1]) with a wall.
/// Returns the motion parameter `t` of the first contact.
pub fn sweep_hit(p: Vec2, r: Vec2, wall: &WallSegment) -> Option<f64> {
    let s = sub(wall.b, wall.a);
    let denom = cross(r, s);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ap = sub(wall.a, p);
    let t = cross(ap, s) / denom;
    let u = cross(ap, r) / denom;
    if (0.0..=1.0).contains(&t) && (-JOINT_TOL..=1.0 + JOINT_TOL).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Distance along the ray from `origin` at `angle` to the nearest wall,
/// capped at `max_range`.
pub fn raycast(origin: Vec2, angle: f64, segments: &[WallSegment], max_range: f64) -> f64 {
    let dir = [angle.cos(), angle.sin()];
    let mut best = max_range;
    for wall in segments {
        let s = sub(wall.b, wall.a);
        let denom = cross(dir, s);
        if denom.abs() < 1e-15 {
            continue;
        }
        let ap = sub(wall.a, origin);
        let t = cross(ap, s) / denom;
        let u = cross(ap, dir) / denom;
        if t >= 0.0 && (0.0..=1.0).contains(&u) && t < best {
            best = t;
        }
    }
    best
}

/// Unit normal of `wall` pointing against `motion`.
fn normal_against(wall: &WallSegment, motion: Vec2) -> Vec2 {
    let s = sub(wall.b, wall.a);
    let len = norm2(s);
    let n = [-s[1] / len, s[0] / len];
    if dot2(n, motion) > 0.0 {
        [-n[0], -n[1]]
    } else {
        n
    }
}

/// Result of resolving one step of motion against walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub position: Vec2,
    pub velocity: Vec2,
    pub collided: bool,
}

/// Move from `position` by `velocity` (one step), stopping `epsilon` short of
/// any wall hit, sliding the remaining motion along the wall and zeroing the
/// velocity component pointing into it.
pub fn resolve_motion(
    position: Vec2,
    velocity: Vec2,
    walls: &[WallSegment],
    epsilon: f64,
) -> Contact {
    let mut p = position;
    let mut v = velocity;
    let mut remaining = velocity;
    let mut collided = false;
    for _ in 0..4 {
        if remaining == [0.0, 0.0] {
            break;
        }
        let hit = walls
            .iter()
            .filter_map(|w| sweep_hit(p, remaining, w).map(|t| (t, w)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let Some((t, wall)) = hit else {
            p = [p[0] + remaining[0], p[1] + remaining[1]];
            break;
        };
        collided = true;
        let n = normal_against(wall, remaining);
        p = [
            p[0] + t * remaining[0] + epsilon * n[0],
            p[1] + t * remaining[1] + epsilon * n[1],
        ];
        // A contact exactly at a concave corner leaves the point on the
        // neighbouring wall's line; push it off that wall too.
        for other in walls {
            if !std::ptr::eq(other, wall) && other.distance_to(p) < 0.5 * epsilon {
                let n2 = normal_against(other, remaining);
                p = [p[0] + epsilon * n2[0], p[1] + epsilon * n2[1]];
            }
        }
        let mut rest = [(1.0 - t) * remaining[0], (1.0 - t) * remaining[1]];
        let into = dot2(rest, n);
        if into < 0.0 {
            rest = [rest[0] - into * n[0], rest[1] - into * n[1]];
        }
        remaining = rest;
        let vn = dot2(v, n);
        if vn < 0.0 {
            v = [v[0] - vn * n[0], v[1] - vn * n[1]];
        }
    }
    // Motion left after the iteration cap is dropped.
    Contact {
        position: p,
        velocity: v,
        collided,
    }
}

/// True when the open segment `p -> q` properly crosses the wall.
pub fn crosses(p: Vec2, q: Vec2, wall: &WallSegment) -> bool {
    let o1 = cross(sub(q, p), sub(wall.a, p));
    let o2 = cross(sub(q, p), sub(wall.b, p));
    let o3 = cross(sub(wall.b, wall.a), sub(p, wall.a));
    let o4 = cross(sub(wall.b, wall.a), sub(q, wall.a));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}
