//! Radar-supervised depth estimation toolkit.
//!
//! The crate covers the radar side of a self-supervised depth training setup
//! for automotive cameras: doppler-compensated accumulation of sparse radar
//! sweeps, noise filtering of the projected points, expansion of the surviving
//! points into dense weak-supervision maps, the loss stack that consumes those
//! maps next to photometric, smoothness, and velocity terms, inference-time
//! preparation of radar input rasters, and class-aware depth evaluation.
//!
//! Everything operates on caller-supplied rasters and point sets; there is no
//! sensor I/O and no network code. A deterministic synthetic scene generator
//! ([`synth`]) provides labeled ground truth for testing the whole chain.

pub mod assoc;
pub mod config;
pub mod geometry;
pub mod gradcheck;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod pipeline;
pub mod radar;
pub mod raster;
pub mod rng;
pub mod synth;
pub mod util;
