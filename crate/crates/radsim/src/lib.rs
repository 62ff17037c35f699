//! Detection-level automotive radar simulator plus a variance-based
//! sensitivity-analysis harness.
//!
//! The crate simulates radar detections of a single target vehicle from a
//! stationary sensor (ray casting against the target footprint, radar range
//! equation, sinc antenna diagram, aspect-dependent RCS, logistic
//! SNR-to-detection-probability conversion), clusters the detections with
//! k-means, compares simulated against reference cluster centers, and runs
//! an extended-FAST sensitivity analysis over the radar sub-model
//! parameters to quantify how much each one drives the clustering metric.

// `!(v > 0.0)` is used throughout validation on purpose: unlike `v <= 0.0`
// it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod fast;
pub mod pipeline;
pub mod radar;
pub mod raycast;
pub mod rng;
pub mod scenario;

mod error;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
