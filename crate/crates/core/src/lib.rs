//! Benchmark engine for single-object tracking of marine animals: box
//! geometry, the on-disk dataset format and attribute taxonomy, the
//! success / precision / normalized-precision metrics, two correlation
//! baselines and a line-protocol bridge to external trackers.

pub mod bridge;
pub mod dataset;
pub mod geometry;
pub mod metrics;
pub mod synthetic;
pub mod tracker;

pub use geometry::{BBox, Point2};
