//! Seeded samplers and the point-cloud type.

mod cloud;
pub mod io;
mod rng;
mod shapes;

pub use cloud::{apply_map, empirical_moments, PointCloud};
pub use rng::{RngStream, StreamId};
pub use shapes::ShapeSpec;
pub(crate) use shapes::gaussian_factor;
