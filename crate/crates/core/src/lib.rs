//! Response-aware spatial-index codebook design for fluid reconfigurable
//! intelligent surfaces.
//!
//! The crate follows the design flow end to end:
//!
//! - [`geometry`]: aperture grid, actuation granularity, feasible candidates.
//! - [`channel`]: cascaded channels, coupling, effective receiver responses.
//! - [`codebook`]: response distances and max-min codebook selection.
//! - [`detection`]: ML index detection, Monte Carlo error rate, bounds.
//! - [`throughput`]: overhead-penalized net index throughput.
//! - [`harness`]: experiment configs, scenario runs and CSV artifacts.

pub mod channel;
pub mod codebook;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod pipeline;
pub mod seed;
pub mod throughput;

pub use error::{Error, Result};
