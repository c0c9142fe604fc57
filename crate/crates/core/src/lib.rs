//! HEALPix tessellation of the unit sphere, its equal-area projection into
//! the plane, and the spherical cap discrepancy of the pixel-center point set.
//!
//! The crate is organized around five layers:
//!
//! - [`geometry`]: points on the sphere, spherical caps, and the analytic
//!   parametrizations of cap boundaries.
//! - [`tessellation`]: pixel indexing, pixel centers (the point set `H_N`),
//!   pixel boundaries and point location.
//! - [`projection`]: the area-preserving map from the punctured sphere onto
//!   the cylinder `[0,2) x (-1/2,1/2)` and its inverse.
//! - [`curve`]: projected cap boundaries as planar curves; length, signed
//!   curvature, convex decomposition, and curve-vs-lattice intersection
//!   counting.
//! - [`discrepancy`]: local and global spherical cap discrepancy (exact and
//!   estimated) and jittered sampling.
//!
//! With the default `parallel` feature the batch routines (candidate scans,
//! Monte Carlo surveys, jittered sampling experiments) run on rayon; without
//! it everything falls back to equivalent sequential loops with identical
//! results.

pub mod curve;
pub mod discrepancy;
pub mod geometry;
pub mod projection;
pub mod tessellation;

mod exec;

pub use geometry::{Branch, Cap, SphericalAngles, UnitVector};
pub use tessellation::{Level, PixelIndex};
