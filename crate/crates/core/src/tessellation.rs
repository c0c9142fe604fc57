//! HEALPix pixel indexing, pixel centers (the point set `H_N`), pixel
//! boundaries, and point location.
//!
//! A pixel is identified by `(s, k, ell, r, c)`: hemisphere class
//! `s in {-1, 0, 1}` (south polar, equatorial, north polar), base-pixel
//! quadrant `k in {0..3}`, and subpixel coordinates `r, c in [1, 2^ell]`.
//! Polar-class pixels with `r + c > L + 1` lie in the equatorial belt but
//! keep their polar-class index.
//!
//! Point location works in the projected plane: every pixel is a half-open
//! axis-parallel square in the rotated coordinates `u = 2(x+y)`,
//! `v = 2(y-x)`, so locating a point is a floor operation. Base cells are
//! the unit squares centered at `(k, -k)` (equatorial), `(k+1, -k)` (north)
//! and `(k, -k-1)` (south); the class is recovered as `s = u_b + v_b`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::Serialize;
use thiserror::Error;

use crate::exec;
use crate::geometry::{wrap_phi, SphericalAngles};
use crate::projection::{project, unproject, PlanarPoint};

pub const MAX_LEVEL: u32 = 15;

#[derive(Debug, Error, PartialEq)]
pub enum TessellationError {
    #[error("resolution level {0} exceeds the supported maximum of {MAX_LEVEL}")]
    LevelTooLarge(u32),
    #[error("invalid pixel index (s={s}, k={k}, r={r}, c={c}) at level {ell}")]
    InvalidIndex { s: i8, k: u8, ell: u32, r: u32, c: u32 },
}

/// Resolution parameter `ell`, with `L = 2^ell` and `N = 12*4^ell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Level(u32);

impl Level {
    pub fn new(ell: u32) -> Result<Self, TessellationError> {
        if ell > MAX_LEVEL {
            return Err(TessellationError::LevelTooLarge(ell));
        }
        Ok(Level(ell))
    }

    pub fn ell(self) -> u32 {
        self.0
    }

    /// `L = 2^ell`.
    pub fn l(self) -> u32 {
        1 << self.0
    }

    /// `N = 12 * 4^ell`.
    pub fn num_pixels(self) -> u64 {
        12u64 << (2 * self.0)
    }

    pub fn finer(self) -> Result<Level, TessellationError> {
        Level::new(self.0 + 1)
    }
}

/// Total number of pixels at level `ell`.
pub fn num_pixels(ell: Level) -> u64 {
    ell.num_pixels()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PixelIndex {
    s: i8,
    k: u8,
    level: Level,
    r: u32,
    c: u32,
}

impl PixelIndex {
    pub fn new(s: i8, k: u8, level: Level, r: u32, c: u32) -> Result<Self, TessellationError> {
        let l = level.l();
        if !matches!(s, -1 | 0 | 1) || k > 3 || r < 1 || r > l || c < 1 || c > l {
            return Err(TessellationError::InvalidIndex { s, k, ell: level.ell(), r, c });
        }
        Ok(Self { s, k, level, r, c })
    }

    pub fn s(self) -> i8 {
        self.s
    }

    pub fn k(self) -> u8 {
        self.k
    }

    pub fn level(self) -> Level {
        self.level
    }

    pub fn r(self) -> u32 {
        self.r
    }

    pub fn c(self) -> u32 {
        self.c
    }

    /// Base-pixel identity (class, quadrant).
    pub fn base_pixel(self) -> (i8, u8) {
        (self.s, self.k)
    }

    /// True for polar-class pixels whose body lies in the polar cap
    /// (`r + c <= L + 1`); belt-resident polar-class pixels return false.
    pub fn is_polar_cap(self) -> bool {
        self.s != 0 && self.r + self.c <= self.level.l() + 1
    }

    /// Position in the lexicographic `(s, k, r, c)` enumeration.
    pub fn ordinal(self) -> u64 {
        let l = self.level.l() as u64;
        let s_ord = (self.s + 1) as u64;
        ((s_ord * 4 + self.k as u64) * l + (self.r as u64 - 1)) * l + (self.c as u64 - 1)
    }

    pub fn from_ordinal(level: Level, i: u64) -> Self {
        let l = level.l() as u64;
        debug_assert!(i < level.num_pixels());
        let c = (i % l) as u32 + 1;
        let r = ((i / l) % l) as u32 + 1;
        let k = ((i / (l * l)) % 4) as u8;
        let s = (i / (4 * l * l)) as i8 - 1;
        Self { s, k, level, r, c }
    }
}

/// Planar cell of a pixel: the half-open square
/// `[u0, u0 + 1/L) x [v0, v0 + 1/L)` in `(u, v)` coordinates, given by its
/// canonical base cell `(ub, vb)` and subcell offsets `iu, iv in [0, L-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PixelCell {
    pub ub: i64,
    pub vb: i64,
    pub iu: u32,
    pub iv: u32,
}

impl PixelCell {
    pub fn origin_uv(self, level: Level) -> (f64, f64) {
        let l = level.l() as f64;
        (
            self.ub as f64 - 0.5 + self.iu as f64 / l,
            self.vb as f64 - 0.5 + self.iv as f64 / l,
        )
    }
}

pub(crate) fn pixel_cell(idx: PixelIndex) -> PixelCell {
    let l = idx.level.l();
    let (k, r, c) = (idx.k as i64, idx.r, idx.c);
    match idx.s {
        0 => PixelCell { ub: k, vb: -k, iu: l - c, iv: l - r },
        1 => {
            let (iu, iv) = if r + c <= l + 1 { (l - r, l - c) } else { (l - c, l - r) };
            PixelCell { ub: k + 1, vb: -k, iu, iv }
        }
        _ => {
            let (iu, iv) = if r + c <= l + 1 { (c - 1, r - 1) } else { (r - 1, c - 1) };
            PixelCell { ub: k, vb: -k - 1, iu, iv }
        }
    }
}

pub(crate) fn pixel_from_cell(level: Level, cell: PixelCell) -> PixelIndex {
    let l = level.l();
    let s = (cell.ub + cell.vb) as i8;
    debug_assert!((-1..=1).contains(&s));
    let k = match s {
        1 => (cell.ub - 1).rem_euclid(4) as u8,
        _ => cell.ub.rem_euclid(4) as u8,
    };
    let a = l - cell.iu;
    let b = l - cell.iv;
    let (r, c) = match s {
        0 => (b, a),
        1 => {
            if a + b <= l + 1 {
                (a, b)
            } else {
                (b, a)
            }
        }
        _ => {
            if a + b >= l + 1 {
                (l + 1 - b, l + 1 - a)
            } else {
                (l + 1 - a, l + 1 - b)
            }
        }
    };
    PixelIndex { s, k, level, r, c }
}

/// Center of a pixel.
pub fn pixel_center(idx: PixelIndex) -> SphericalAngles {
    let l = idx.level.l() as f64;
    let (k, r, c) = (idx.k as f64, idx.r as f64, idx.c as f64);
    let ring = r + c - 1.0;
    let (phi, z) = match idx.s {
        0 => (PI * (r - c) / (4.0 * l) + k * FRAC_PI_2, 2.0 / 3.0 - 2.0 * ring / (3.0 * l)),
        _ => {
            let (phi, z) = if idx.r + idx.c <= idx.level.l() + 1 {
                (
                    k * FRAC_PI_2 + PI * (2.0 * c - 1.0) / (4.0 * ring),
                    1.0 - ring * ring / (3.0 * l * l),
                )
            } else {
                (
                    PI * (r - c) / (4.0 * l) + (2.0 * k + 1.0) * FRAC_PI_4,
                    4.0 / 3.0 - 2.0 * ring / (3.0 * l),
                )
            };
            (phi, if idx.s == 1 { z } else { -z })
        }
    };
    SphericalAngles::new(phi, z.clamp(-1.0, 1.0).acos())
}

/// All `N` pixel centers, ordered lexicographically in `(s, k, r, c)`.
pub fn healpix_points(ell: Level) -> Vec<SphericalAngles> {
    let n = ell.num_pixels() as usize;
    exec::map_indexed(n, |i| pixel_center(PixelIndex::from_ordinal(ell, i as u64)))
}

/// Locates the unique pixel containing `p` under the half-open convention.
pub fn point_to_pixel(p: SphericalAngles, ell: Level) -> PixelIndex {
    match project(p) {
        Ok(q) => point_to_pixel_plane(q, ell),
        // Exact poles and theta so small that cos rounds to +-1.
        Err(_) => pole_pixel(p.theta < FRAC_PI_2, ell),
    }
}

fn pole_pixel(north: bool, ell: Level) -> PixelIndex {
    PixelIndex { s: if north { 1 } else { -1 }, k: 0, level: ell, r: 1, c: 1 }
}

/// Point location for a planar point already in the projection rectangle.
pub fn point_to_pixel_plane(q: PlanarPoint, ell: Level) -> PixelIndex {
    if q.y >= 0.5 {
        return pole_pixel(true, ell);
    }
    if q.y <= -0.5 {
        return pole_pixel(false, ell);
    }
    let (u, v) = (q.u(), q.v());
    let mut ub = (u + 0.5).floor() as i64;
    let mut vb = (v + 0.5).floor() as i64;
    // Points exactly on a northern fold meridian land in a diagonal gap
    // between two base cells (both adjacent cells exclude the fold under
    // the half-open convention); assign them to the quadrant east of the
    // meridian. The mirrored guard covers the southern folds.
    match ub + vb {
        2 => vb -= 1,
        -2 => ub += 1,
        _ => {}
    }
    let l = ell.l();
    let du = u - (ub as f64 - 0.5);
    let dv = v - (vb as f64 - 0.5);
    let iu = ((du * l as f64).floor() as i64).clamp(0, l as i64 - 1) as u32;
    let iv = ((dv * l as f64).floor() as i64).clamp(0, l as i64 - 1) as u32;
    pixel_from_cell(ell, PixelCell { ub, vb, iu, iv })
}

/// Uniform random point in the projected half-open cell of `idx`.
pub fn sample_in_pixel_plane<R: rand::Rng + ?Sized>(idx: PixelIndex, rng: &mut R) -> PlanarPoint {
    let cell = pixel_cell(idx);
    let (u0, v0) = cell.origin_uv(idx.level);
    let h = 1.0 / idx.level.l() as f64;
    PlanarPoint::from_uv(u0 + h * rng.random::<f64>(), v0 + h * rng.random::<f64>())
}

/// The N/E/S/W corners of the pixel. Pole-adjacent pixels return the pole
/// as the degenerate N (or S) vertex.
pub fn pixel_vertices(idx: PixelIndex) -> [SphericalAngles; 4] {
    let cell = pixel_cell(idx);
    let (u0, v0) = cell.origin_uv(idx.level);
    let h = 1.0 / idx.level.l() as f64;
    let corner = |u: f64, v: f64| {
        unproject(PlanarPoint::from_uv(u, v)).expect("pixel corners lie in the projection image")
    };
    [
        corner(u0 + h, v0 + h), // N: largest z
        corner(u0 + h, v0),     // E: largest phi
        corner(u0, v0),         // S
        corner(u0, v0 + h),     // W
    ]
}

/// The distinct pixels whose closure contains `p`, found by locating a
/// small stencil of perturbed copies of `p` (angular radius `tol`).
pub fn pixels_touching(p: SphericalAngles, ell: Level, tol: f64) -> Vec<PixelIndex> {
    if p.theta < tol || p.theta > PI - tol {
        let s = if p.theta < tol { 1 } else { -1 };
        return (0..4)
            .map(|k| PixelIndex { s, k, level: ell, r: 1, c: 1 })
            .collect();
    }
    let mut found: Vec<PixelIndex> = Vec::with_capacity(4);
    let dphi = tol / p.theta.sin().max(tol);
    for i in -1i32..=1 {
        for j in -1i32..=1 {
            let theta = (p.theta + j as f64 * tol).clamp(0.0, PI);
            let q = SphericalAngles::new(p.phi + i as f64 * dphi, theta);
            let idx = point_to_pixel(q, ell);
            if !found.contains(&idx) {
                found.push(idx);
            }
        }
    }
    found
}

/// Analytic family of a pixel boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveKind {
    /// `cos(theta) = 2/3 - (8/(3pi)) (phi - j pi/(2L))` on `I_j`.
    EquatorialM,
    /// `cos(theta) = -2/3 + (8/(3pi)) (phi - j pi/(2L))` on `I_j`.
    EquatorialP,
    /// `cos(theta) = 1 - (j^2/(3L^2)) (pi / (2 Phi))^2`, `Phi = (k+1)pi/2 - phi`.
    PolarM,
    /// Same with `psi = phi - k pi/2` in place of `Phi`.
    PolarP,
    /// Constant-`phi` arc between a pole and `|cos(theta)| = 2/3`.
    Meridian,
}

/// One pixel boundary edge, evaluable as `theta(phi)` on `phi_domain`
/// (meridians are constant in `phi` and parametrized by `theta` instead).
///
/// `phi_domain` is continuous (not wrapped): near the seam it may extend
/// outside `[0, 2pi)` so that it stays inside the curve's natural interval
/// `I_j`. `south = true` mirrors the polar formulas to the southern
/// hemisphere (`z -> -z`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryCurve {
    pub kind: CurveKind,
    pub j: u32,
    pub k: u8,
    pub south: bool,
    pub level: Level,
    pub phi_domain: (f64, f64),
    pub theta_domain: (f64, f64),
}

impl BoundaryCurve {
    /// Full-domain constructor for the belt curve `m_j` (`j in [0, 4L)`).
    pub fn equatorial_m(j: u32, level: Level) -> Self {
        let l = level.l() as f64;
        let lo = j as f64 * FRAC_PI_2 / l;
        Self {
            kind: CurveKind::EquatorialM,
            j,
            k: 0,
            south: false,
            level,
            phi_domain: (lo, lo + FRAC_PI_2),
            theta_domain: ((2.0f64 / 3.0).acos(), (-2.0f64 / 3.0).acos()),
        }
    }

    /// Full-domain constructor for the belt curve `p_j` (`j in [0, 4L)`).
    pub fn equatorial_p(j: u32, level: Level) -> Self {
        Self {
            kind: CurveKind::EquatorialP,
            theta_domain: ((-2.0f64 / 3.0).acos(), (2.0f64 / 3.0).acos()),
            ..Self::equatorial_m(j, level)
        }
    }

    /// Full-domain constructor for the polar curve `m_{j,k}` (`1 <= j < L`).
    pub fn polar_m(j: u32, k: u8, level: Level, south: bool) -> Self {
        let l = level.l() as f64;
        let jf = j as f64;
        let z_end = 1.0 - jf * jf / (3.0 * l * l);
        let th = |z: f64| if south { (-z).acos() } else { z.acos() };
        Self {
            kind: CurveKind::PolarM,
            j,
            k,
            south,
            level,
            phi_domain: (k as f64 * FRAC_PI_2, (k as f64 + 1.0 - jf / l) * FRAC_PI_2),
            theta_domain: (th(z_end), th(2.0 / 3.0)),
        }
    }

    /// Full-domain constructor for the polar curve `p_{j,k}` (`1 <= j < L`).
    pub fn polar_p(j: u32, k: u8, level: Level, south: bool) -> Self {
        let l = level.l() as f64;
        let jf = j as f64;
        let z_end = 1.0 - jf * jf / (3.0 * l * l);
        let th = |z: f64| if south { (-z).acos() } else { z.acos() };
        Self {
            kind: CurveKind::PolarP,
            j,
            k,
            south,
            level,
            phi_domain: ((k as f64 + jf / l) * FRAC_PI_2, (k as f64 + 1.0) * FRAC_PI_2),
            theta_domain: (th(2.0 / 3.0), th(z_end)),
        }
    }

    /// Meridian segment at `phi`, from the pole to `|cos(theta)| = 2/3`.
    pub fn meridian(phi: f64, level: Level, south: bool) -> Self {
        let theta_domain = if south {
            ((-2.0f64 / 3.0).acos(), PI)
        } else {
            (0.0, (2.0f64 / 3.0).acos())
        };
        Self {
            kind: CurveKind::Meridian,
            j: 0,
            k: 0,
            south,
            level,
            phi_domain: (phi, phi),
            theta_domain,
        }
    }

    pub fn is_meridian(&self) -> bool {
        self.kind == CurveKind::Meridian
    }

    /// Evaluates `cos(theta)` at `phi` (given in the continuous domain
    /// coordinates of `phi_domain`). Not defined for meridians.
    pub fn cos_theta(&self, phi: f64) -> f64 {
        let l = self.level.l() as f64;
        match self.kind {
            CurveKind::EquatorialM => {
                2.0 / 3.0 - 8.0 / (3.0 * PI) * (phi - self.j as f64 * FRAC_PI_2 / l)
            }
            CurveKind::EquatorialP => {
                -2.0 / 3.0 + 8.0 / (3.0 * PI) * (phi - self.j as f64 * FRAC_PI_2 / l)
            }
            CurveKind::PolarM | CurveKind::PolarP => {
                let angle = match self.kind {
                    CurveKind::PolarM => (self.k as f64 + 1.0) * FRAC_PI_2 - phi,
                    _ => phi - self.k as f64 * FRAC_PI_2,
                };
                let jl = self.j as f64 / l;
                let z = 1.0 - jl * jl / 3.0 * (FRAC_PI_2 / angle).powi(2);
                if self.south {
                    -z
                } else {
                    z
                }
            }
            CurveKind::Meridian => panic!("meridians are not graphs theta(phi)"),
        }
    }

    /// `n >= 2` points along the edge, endpoints included.
    pub fn sample(&self, n: usize) -> Vec<SphericalAngles> {
        assert!(n >= 2);
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if self.is_meridian() {
                    let theta = self.theta_domain.0
                        + t * (self.theta_domain.1 - self.theta_domain.0);
                    SphericalAngles::new(self.phi_domain.0, theta)
                } else {
                    let phi = self.phi_domain.0 + t * (self.phi_domain.1 - self.phi_domain.0);
                    SphericalAngles::new(phi, self.cos_theta(phi).clamp(-1.0, 1.0).acos())
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy)]
enum EdgeAxis {
    ConstU,
    ConstV,
}

/// The four boundary edges of a pixel, in W/E/S/N cell order: the two
/// constant-`u` sides (m-type) followed by the two constant-`v` sides
/// (p-type). Sides lying on base-pixel meridians come back as `Meridian`.
pub fn pixel_boundary(idx: PixelIndex) -> [BoundaryCurve; 4] {
    let cell = pixel_cell(idx);
    let level = idx.level;
    let l = level.l();
    let h = 1.0 / l as f64;
    let (u0, v0) = cell.origin_uv(level);
    [
        edge_curve(level, cell, EdgeAxis::ConstU, cell.iu, u0, (v0, v0 + h)),
        edge_curve(level, cell, EdgeAxis::ConstU, cell.iu + 1, u0 + h, (v0, v0 + h)),
        edge_curve(level, cell, EdgeAxis::ConstV, cell.iv, v0, (u0, u0 + h)),
        edge_curve(level, cell, EdgeAxis::ConstV, cell.iv + 1, v0 + h, (u0, u0 + h)),
    ]
}

fn edge_curve(
    level: Level,
    cell: PixelCell,
    axis: EdgeAxis,
    i: u32,
    fixed: f64,
    span: (f64, f64),
) -> BoundaryCurve {
    let l = level.l() as i64;
    let lf = l as f64;
    let s = cell.ub + cell.vb;
    let k = match s {
        1 => (cell.ub - 1).rem_euclid(4) as u8,
        _ => cell.ub.rem_euclid(4) as u8,
    };
    let mid = 0.5 * (span.0 + span.1);
    // Edge midpoint height y = (u + v)/4 selects the region.
    let y_mid = 0.25 * (fixed + mid);
    let angles_at = |other: f64| {
        let (u, v) = match axis {
            EdgeAxis::ConstU => (fixed, other),
            EdgeAxis::ConstV => (other, fixed),
        };
        unproject(PlanarPoint::from_uv(u, v)).expect("pixel edges lie in the projection image")
    };

    if y_mid.abs() < 0.25 {
        // Belt edge: j is read off the fixed coordinate, phi runs linearly
        // along the edge (kept continuous, shifted into I_j).
        let (kind, j_raw) = match axis {
            EdgeAxis::ConstU => (CurveKind::EquatorialM, l * (cell.ub - 1) + i as i64),
            EdgeAxis::ConstV => (CurveKind::EquatorialP, -l * cell.vb - i as i64),
        };
        let j = j_raw.rem_euclid(4 * l);
        let shift = (j - j_raw) as f64 / (4.0 * lf) * 2.0 * PI;
        let (xa, xb) = match axis {
            EdgeAxis::ConstU => (0.25 * (fixed - span.1), 0.25 * (fixed - span.0)),
            EdgeAxis::ConstV => (0.25 * (span.0 - fixed), 0.25 * (span.1 - fixed)),
        };
        let mut curve = match kind {
            CurveKind::EquatorialM => BoundaryCurve::equatorial_m(j as u32, level),
            _ => BoundaryCurve::equatorial_p(j as u32, level),
        };
        curve.phi_domain = (PI * xa + shift, PI * xb + shift);
        let (ta, tb) = (
            curve.cos_theta(curve.phi_domain.0).clamp(-1.0, 1.0).acos(),
            curve.cos_theta(curve.phi_domain.1).clamp(-1.0, 1.0).acos(),
        );
        curve.theta_domain = (ta.min(tb), ta.max(tb));
        return curve;
    }

    let south = y_mid < 0.0;
    // Polar edge index: counts fold-meridian distance along the fixed axis.
    let j = if south {
        i as i64
    } else {
        l - i as i64
    };
    if j == 0 || j == l {
        let phi = match (axis, south) {
            (EdgeAxis::ConstU, false) | (EdgeAxis::ConstV, true) => (k as f64 + 1.0) * FRAC_PI_2,
            _ => k as f64 * FRAC_PI_2,
        };
        let mut curve = BoundaryCurve::meridian(wrap_phi(phi), level, south);
        let (ta, tb) = (angles_at(span.0).theta, angles_at(span.1).theta);
        curve.theta_domain = (ta.min(tb), ta.max(tb));
        return curve;
    }
    // Northern constant-u edges are m-curves and constant-v edges are
    // p-curves; the z-flip swaps the roles in the south.
    let polar_m = matches!(
        (axis, south),
        (EdgeAxis::ConstU, false) | (EdgeAxis::ConstV, true)
    );
    let mut curve = if polar_m {
        BoundaryCurve::polar_m(j as u32, k, level, south)
    } else {
        BoundaryCurve::polar_p(j as u32, k, level, south)
    };
    let (pa, pb) = (angles_at(span.0), angles_at(span.1));
    let (mut fa, mut fb) = (pa.phi, pb.phi);
    // Canonical cells keep polar phi inside [k, k+1] * pi/2; a wrapped 0 at
    // the right end of quadrant 3 means 2*pi.
    if k == 3 {
        if fa < FRAC_PI_2 {
            fa += 2.0 * PI;
        }
        if fb < FRAC_PI_2 {
            fb += 2.0 * PI;
        }
    }
    curve.phi_domain = (fa.min(fb), fa.max(fb));
    curve.theta_domain = (pa.theta.min(pb.theta), pa.theta.max(pb.theta));
    curve
}
