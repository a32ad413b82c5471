//! Path-level thermal history simulation for laser powder bed fusion on a
//! solid surface.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`toolpath`]: scan vectors with distance-parameterized laser power,
//!    raster generation, fictitious domain rings and sub-path discretization.
//! 2. [`mesh`]: toolpath-aligned box elements, simultaneous width growth
//!    (an approximate Voronoi diagram of the path segments) and the contact
//!    graph carrying per-edge conduction geometry.
//! 3. [`solver`]: explicit lumped-capacitance integration with Gaussian laser
//!    input, in-process power normalization, capped-distance conduction,
//!    convection, radiation and active-body locality.
//! 4. [`meltpool`]: melt pool length/width extraction from simulated states
//!    and from co-axial monitoring frames.
//!
//! Everything is in SI units (m, s, W, K, J, kg).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod error;
pub mod geom;
pub mod materials;
pub mod meltpool;
pub mod mesh;
pub mod model;
pub mod par;
pub mod solver;
pub mod toolpath;

pub use error::{Error, Result};
