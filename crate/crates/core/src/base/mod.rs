//! Shared numeric and trajectory types.

mod obs;
mod params;
mod returns;
mod rng;
mod trajectory;

pub use obs::{FactoredObservation, ObsLayout};
pub use params::{axpy, dot, norm, ParamVector, ShapeTable};
pub use returns::{discounted_return, normalize};
pub use rng::{stream_id, RngStream, StreamTag};
pub use trajectory::{Trajectory, TrajectoryBatch};

/// A planar point or vector in arena units.
pub type Vec2 = [f64; 2];
