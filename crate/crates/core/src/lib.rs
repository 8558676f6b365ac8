//! Uniform sampling, volume estimation and isoperimetry diagnostics for
//! star-shaped bodies given by membership oracles.
//!
//! A body is anything implementing [`StarBody`]: a membership oracle for the
//! body, a membership oracle for (a convex subset of) its kernel, a point of
//! the kernel and a radius bound. The ball walk in [`ballwalk`] samples such
//! bodies from a kernel warm start; [`volume`] multiplies a multiphase kernel
//! volume by the inverse kernel fraction; [`diagnostics`] checks the
//! isoperimetric and conductance inequalities empirically.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ballwalk;
pub mod constructions;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod hardness;
pub mod isotropy;
pub mod quad;
pub mod rng;
pub mod spec;
pub mod stats;
pub mod thinpart;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, Halfspace, Point, Polytope, StarBody};
pub use spec::BodySpec;

/// Library version string, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
