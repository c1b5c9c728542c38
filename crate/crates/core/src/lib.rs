//! Environment-aware channel prediction benchmark.
//!
//! Synthesizes urban scenes, computes ground-truth channels with a ray-based
//! oracle, extracts four levels of wireless environment information and
//! trains small networks on them.

pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod neuralnet;
pub mod propagation;
pub mod seed;
pub mod store;
pub mod wei;

pub use error::{Error, Result};
