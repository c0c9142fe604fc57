//! The area-preserving (up to scaling) projection of the punctured sphere
//! onto the cylinder `R = [0,2) x (-1/2, 1/2)`, its analytic inverse, and
//! the lattice description of projected pixel corners.
//!
//! The map has three branches separated at `cos(theta) = +-2/3`: the
//! equatorial belt goes to the horizontal band `|y| <= 1/4`, the polar caps
//! to the zigzag triangles above and below it. Pixel boundaries project to
//! straight segments of slope `+-1`, so the rotated coordinates
//! `u = 2(x+y)`, `v = 2(y-x)` turn every pixel into an axis-parallel unit
//! square (scaled by `1/2^ell`).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::SphericalAngles;
use crate::tessellation::Level;

/// Separation height between the equatorial belt and the polar caps.
pub const TRANSITION_Z: f64 = 2.0 / 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("the projection is undefined at the poles")]
    Pole,
    #[error("planar point ({0}, {1}) lies outside the projected sphere")]
    OutOfDomain(f64, f64),
}

/// A point of the projection rectangle `R`. The `x` coordinate is cyclic
/// with period 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x: wrap_x(x), y }
    }

    /// Rotated lattice coordinate `u = 2(x + y)`.
    pub fn u(self) -> f64 {
        2.0 * (self.x + self.y)
    }

    /// Rotated lattice coordinate `v = 2(y - x)`.
    pub fn v(self) -> f64 {
        2.0 * (self.y - self.x)
    }

    pub fn from_uv(u: f64, v: f64) -> Self {
        PlanarPoint::new((u - v) / 4.0, (u + v) / 4.0)
    }
}

/// Wraps an `x` coordinate into `[0, 2)`.
pub fn wrap_x(x: f64) -> f64 {
    let mut r = x % 2.0;
    if r < 0.0 {
        r += 2.0;
    }
    if r >= 2.0 {
        r = 0.0;
    }
    r
}

/// Splits `phi` into a quadrant index `k in {0,1,2,3}` and the remainder
/// `phi mod pi/2 in [0, pi/2)`, snapping to the quadrant boundary when
/// within `1e-14` of it.
pub fn quadrant(phi: f64) -> (u8, f64) {
    let t = phi / FRAC_PI_2;
    let mut k = t.floor();
    if t - k > 1.0 - 1e-14 {
        k += 1.0;
    }
    let mut m = phi - k * FRAC_PI_2;
    if m.abs() < 1e-14 {
        m = 0.0;
    }
    (((k as i64).rem_euclid(4)) as u8, m)
}

/// Projects a point of the punctured sphere into `R`.
pub fn project(p: SphericalAngles) -> Result<PlanarPoint, ProjectionError> {
    let z = p.cos_theta();
    if p.is_pole() || z.abs() >= 1.0 {
        return Err(ProjectionError::Pole);
    }
    if z.abs() <= TRANSITION_Z {
        return Ok(PlanarPoint::new(p.phi / PI, 0.375 * z));
    }
    let sigma = (3.0 * (1.0 - z.abs())).sqrt();
    let (_, m) = quadrant(p.phi);
    let x = (p.phi - (1.0 - sigma) * (m - FRAC_PI_4)) / PI;
    let y = 0.25 * (2.0 - sigma);
    Ok(PlanarPoint::new(x, if z > 0.0 { y } else { -y }))
}

/// Analytic inverse of [`project`]. `y = +-1/2` maps to the corresponding
/// pole (with `phi = 0`); points in the empty corners of `R` are rejected.
pub fn unproject(q: PlanarPoint) -> Result<SphericalAngles, ProjectionError> {
    let x = wrap_x(q.x);
    let y = q.y;
    if y.abs() > 0.5 {
        return Err(ProjectionError::OutOfDomain(x, y));
    }
    if y.abs() >= 0.5 {
        return Ok(SphericalAngles::new(0.0, if y > 0.0 { 0.0 } else { PI }));
    }
    if y.abs() <= 0.25 {
        let z = 8.0 * y / 3.0;
        return Ok(SphericalAngles::new(PI * x, z.clamp(-1.0, 1.0).acos()));
    }
    let sigma = 2.0 - 4.0 * y.abs();
    let z_abs = 1.0 - sigma * sigma / 3.0;
    let z = if y > 0.0 { z_abs } else { -z_abs };
    // The apex nearest to x sets the quadrant.
    let k = ((2.0 * (x - 0.25)).round() as i64).rem_euclid(4);
    let apex_x = 0.25 + 0.5 * ((2.0 * (x - 0.25)).round());
    let u = (PI * x - PI * apex_x) / sigma;
    if u.abs() > FRAC_PI_4 + 1e-12 / sigma.max(1e-12) {
        return Err(ProjectionError::OutOfDomain(x, y));
    }
    let u = u.clamp(-FRAC_PI_4, FRAC_PI_4);
    let phi = k as f64 * FRAC_PI_2 + FRAC_PI_4 + u;
    Ok(SphericalAngles::new(phi, z.clamp(-1.0, 1.0).acos()))
}

/// The tiling `(1/K)(Q Z^2 + Omega_v^Q)` of the plane by half-open
/// parallelograms, with `Omega_v^Q = Q [0,1)^2 + v`.
#[derive(Debug, Clone, Copy)]
pub struct LatticeSpec {
    /// Invertible cell matrix (column-major pair of column vectors).
    pub q: [[f64; 2]; 2],
    /// Tiling offset.
    pub v: [f64; 2],
    /// Refinement factor.
    pub k: u32,
}

impl LatticeSpec {
    pub fn new(q: [[f64; 2]; 2], v: [f64; 2], k: u32) -> Self {
        debug_assert!(Self { q, v, k }.det().abs() > 1e-12);
        Self { q, v, k }
    }

    pub fn det(&self) -> f64 {
        self.q[0][0] * self.q[1][1] - self.q[0][1] * self.q[1][0]
    }

    /// Maps a plane point into lattice cell coordinates: `Q^{-1}(K p - v)`.
    /// The half-open unit cell `[i, i+1) x [j, j+1)` of the result is the
    /// tiling cell containing `p`.
    pub fn to_cell_coords(&self, p: (f64, f64)) -> (f64, f64) {
        let kx = self.k as f64 * p.0 - self.v[0];
        let ky = self.k as f64 * p.1 - self.v[1];
        let det = self.det();
        (
            (self.q[1][1] * kx - self.q[0][1] * ky) / det,
            (-self.q[1][0] * kx + self.q[0][0] * ky) / det,
        )
    }

    /// Length scale factor of `Q^{-1}` applied to a curve, exact for
    /// similarity transforms (which `pixel_lattice` produces).
    pub fn inv_length_scale(&self) -> f64 {
        // Operator norm of Q^{-1} for the similarity case; for general Q
        // callers should rescale lengths themselves.
        let col0 = (self.q[0][0].powi(2) + self.q[0][1].powi(2)).sqrt();
        1.0 / col0
    }
}

/// The lattice whose refined cells are exactly the projected subpixels of
/// the level-`ell` tessellation: `Q` maps the unit square to a diamond with
/// half-diagonals 1, `v` pins the tiling to the bottom corner of the first
/// equatorial base pixel, and `K = 2^(ell+2)`.
pub fn pixel_lattice(ell: Level) -> LatticeSpec {
    let k = 1u32 << (ell.ell() + 2);
    // Columns (1,1) and (-1,1): Q^{-1} scales lengths by 1/sqrt(2).
    let q = [[1.0, 1.0], [-1.0, 1.0]];
    // (0, -1/4) scaled by K.
    let v = [0.0, -((1u64 << ell.ell()) as f64)];
    LatticeSpec::new(q, v, k)
}

/// Monte-Carlo comparison of `area(A)/area(B)` on the sphere against
/// `area(G(A))/area(G(B))` in the plane, for `A` given by a membership
/// predicate inside the base pixel `B`. Test support for the area
/// preservation statement.
pub struct AreaRatio {
    pub sphere_ratio: f64,
    pub plane_ratio: f64,
    pub sphere_hits: u64,
    pub plane_hits: u64,
}

pub fn area_ratio<F, R>(
    pred: F,
    base: crate::tessellation::PixelIndex,
    samples: u64,
    rng: &mut R,
) -> AreaRatio
where
    F: Fn(crate::geometry::UnitVector) -> bool,
    R: rand::Rng + ?Sized,
{
    use crate::tessellation::point_to_pixel;

    let base_pixel = base.base_pixel();
    let level = base.level();

    // Sphere measure: uniform sphere points restricted to B.
    let mut sphere_in_base = 0u64;
    let mut sphere_hits = 0u64;
    while sphere_in_base < samples {
        let p = crate::geometry::random_unit_vector(rng);
        let idx = point_to_pixel(p.to_angles(), level);
        if idx.base_pixel() == base_pixel {
            sphere_in_base += 1;
            if pred(p) {
                sphere_hits += 1;
            }
        }
    }

    // Plane measure: uniform points in the projected cell of B.
    let mut plane_hits = 0u64;
    for _ in 0..samples {
        let q = crate::tessellation::sample_in_pixel_plane(base, rng);
        if let Ok(a) = unproject(q) {
            if pred(a.to_unit_vector()) {
                plane_hits += 1;
            }
        }
    }

    AreaRatio {
        sphere_ratio: sphere_hits as f64 / samples as f64,
        plane_ratio: plane_hits as f64 / samples as f64,
        sphere_hits,
        plane_hits,
    }
}
