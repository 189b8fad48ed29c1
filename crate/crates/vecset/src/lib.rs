//! Set-latent neural occupancy fields with latent diffusion.
//!
//! The pipeline: sample a surface point cloud from a watertight mesh, encode
//! it into a fixed-size set of latent vectors with cross attention, compress
//! through a variational bottleneck, decode occupancy at arbitrary query
//! points via attention interpolation, and generate new latent sets with an
//! EDM-style diffusion model. Surfaces are extracted with marching cubes and
//! scored with point-cloud and feature-distribution metrics.
//!
//! Training math runs in f64 on a per-step autodiff tape ([`tensor`]);
//! checkpoints and dataset caches are stored as f32 blobs. With the
//! `parallel` feature (default) the hot kernels run on rayon with a
//! sequential fallback below a work threshold.

pub mod config;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod pipeline;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod verify;

pub mod diffusion;

pub use error::{Error, Result};
