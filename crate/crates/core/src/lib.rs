//! Lean-image geo-localization toolkit.
//!
//! Builds datasets of geometry-only renderings (edges, facade mask, depth) of
//! an untextured city model sampled on a 4D pose grid `(x, y, yaw, pitch)`,
//! and scores pose predictions with grid-based retrieval and interpolation
//! metrics.
//!
//! * [`scene`]: city model loading, procedural synthesis, containment queries
//! * [`pose`]: pose, quaternion and normalized label conversions
//! * [`raster`]: z-buffer renderer for the three lean image types
//! * [`sampler`]: pose grids, validity rules, splits and label shuffling
//! * [`dataset`]: on-disk manifests, images and prediction files
//! * [`eval`]: nearest-neighbour and hyper-cube metrics, heatmaps
//! * [`cli`]: experiment configs and the end-to-end commands

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod geom;
pub mod pose;
pub mod raster;
pub mod sampler;
pub mod scene;

pub use error::{Error, Result};
