//! Projected cap boundaries as planar curves.
//!
//! A spherical cap boundary, pushed through the equal-area projection,
//! becomes a planar curve made of analytic arcs (and exact segments for the
//! symmetric cap families). This module builds those curves, measures their
//! length, evaluates signed curvature in the equatorial and polar charts,
//! counts curvature sign changes via the closed-form condition polynomials,
//! decomposes curves into convex pieces by tangent-ray shooting, and counts
//! intersections with scaled lattice tilings and with the pixel tessellation.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use thiserror::Error;

use crate::geometry::{wrap_phi, Branch, Cap, CapKind, SphericalAngles, UnitVector};
use crate::projection::{quadrant, LatticeSpec, TRANSITION_Z};
use crate::tessellation::{pixels_touching, point_to_pixel, Level};

/// Planar distance below which adjacent polyline samples are not refined
/// further (`2^-12`).
pub const EPS_STEP: f64 = 2.44140625e-4;

/// Planar gap below which consecutive pieces are joined into one chain.
const JOIN_TOL: f64 = 1e-6;

/// Normalized-cross-product band inside which a discrete turn counts as zero.
const TURN_ZERO_BAND: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("degenerate cap: |t| = 1 or the boundary family does not apply")]
    DegenerateCap,
    #[error("singular parameter theta = {theta}: {reason}")]
    SingularParameter { theta: f64, reason: &'static str },
    #[error("non-regular curve: velocity below 1e-12")]
    NonRegularCurve,
    #[error("ray-shooting iteration limit (200) exceeded")]
    RayLimit,
}

/// Chart of the projection a curve piece lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Equatorial,
    NorthPolar,
    SouthPolar,
}

/// Whether pixel closures or pixel interiors-with-half-open-edges are used
/// when deciding that the cap boundary meets a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TouchConvention {
    /// A pixel counts if its closure meets the boundary (vertex and edge
    /// touches included).
    Closed,
    /// A pixel counts if a boundary point locates into it under the
    /// half-open point-location rule.
    Open,
}

/// Projection chart used to evaluate an analytic arc without wrap-around:
/// `x` values are left unwrapped (continuous), so a chain may live outside
/// `[0,2)` by a multiple of 2.
#[derive(Debug, Clone, Copy)]
enum Chart {
    Belt,
    Polar { k: u8, phi_shift: f64, north: bool },
}

/// One analytic branch piece of a projected generic cap boundary, in the
/// reduced symmetry frame, parametrized by the polar angle `theta`.
#[derive(Debug, Clone, Copy)]
struct ArcPiece {
    phi_w: f64,
    cw: f64,
    sw: f64,
    t: f64,
    sign: f64,
    flip: bool,
    chart: Chart,
}

impl ArcPiece {
    fn eval(&self, theta: f64) -> (f64, f64) {
        let (st, ct) = theta.sin_cos();
        let raw = ((self.t - ct * self.cw) / (st * self.sw)).clamp(-1.0, 1.0);
        let phi = self.phi_w + self.sign * raw.acos();
        let (x, y) = match self.chart {
            Chart::Belt => (phi / PI, 3.0 * ct / 8.0),
            Chart::Polar { k, phi_shift, north } => {
                let az = if north { ct } else { -ct };
                let sigma = (3.0 * (1.0 - az)).max(0.0).sqrt();
                let phic = phi + phi_shift;
                let x = (phic - (1.0 - sigma) * (phic - k as f64 * FRAC_PI_2 - FRAC_PI_4)) / PI;
                let y = (2.0 - sigma) / 4.0 * if north { 1.0 } else { -1.0 };
                (x, y)
            }
        };
        if self.flip {
            (x, -y)
        } else {
            (x, y)
        }
    }
}

#[derive(Debug, Clone)]
enum PieceKind {
    Seg { a: (f64, f64), b: (f64, f64) },
    Arc(ArcPiece),
    Poly,
}

/// A continuous parametric piece of a planar curve with its cached adaptive
/// polyline.
#[derive(Debug, Clone)]
pub struct CurvePiece {
    kind: PieceKind,
    region: Option<Region>,
    branch: Option<Branch>,
    t0: f64,
    t1: f64,
    poly: Vec<(f64, (f64, f64))>,
}

impl CurvePiece {
    pub fn region(&self) -> Option<Region> {
        self.region
    }

    pub fn branch(&self) -> Option<Branch> {
        self.branch
    }

    /// Parameter interval `(t0, t1)`; `t0 > t1` means the piece is traversed
    /// with decreasing parameter.
    pub fn param_range(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    /// Evaluates the piece at a parameter value. Analytic arcs take the
    /// polar angle `theta`; exact segments take `t in [0,1]`; polyline
    /// pieces interpolate the cached samples.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match &self.kind {
            PieceKind::Seg { a, b } => (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)),
            PieceKind::Arc(arc) => arc.eval(t),
            PieceKind::Poly => {
                let fwd = self.t1 >= self.t0;
                let idx = self.poly.partition_point(|&(p, _)| if fwd { p < t } else { p > t });
                if idx == 0 {
                    return self.poly[0].1;
                }
                if idx >= self.poly.len() {
                    return self.poly[self.poly.len() - 1].1;
                }
                let (pa, a) = self.poly[idx - 1];
                let (pb, b) = self.poly[idx];
                let f = if (pb - pa).abs() < 1e-300 { 0.0 } else { (t - pa) / (pb - pa) };
                (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1))
            }
        }
    }

    /// The cached `(parameter, point)` samples, refined to [`EPS_STEP`].
    pub fn polyline(&self) -> &[(f64, (f64, f64))] {
        &self.poly
    }

    pub fn is_segment(&self) -> bool {
        matches!(self.kind, PieceKind::Seg { .. })
    }
}

/// A projected cap boundary (or any piecewise curve) in the plane.
#[derive(Debug, Clone)]
pub struct PlanarCurve {
    pieces: Vec<CurvePiece>,
}

impl PlanarCurve {
    pub fn pieces(&self) -> &[CurvePiece] {
        &self.pieces
    }

    /// Wraps a bare polyline into a single-piece curve, parametrized by
    /// cumulative chord length.
    pub fn from_polyline(points: &[(f64, f64)]) -> Self {
        let mut poly = Vec::with_capacity(points.len());
        let mut s = 0.0;
        for (i, &p) in points.iter().enumerate() {
            if i > 0 {
                s += dist(points[i - 1], p);
            }
            poly.push((s, p));
        }
        let t1 = s;
        PlanarCurve {
            pieces: vec![CurvePiece {
                kind: PieceKind::Poly,
                region: None,
                branch: None,
                t0: 0.0,
                t1,
                poly,
            }],
        }
    }

    /// Concatenates the piece polylines into maximal continuous chains.
    ///
    /// Pieces are evaluated in unwrapped charts, so consecutive pieces can
    /// differ by a multiple of 2 in `x` across the seam; the shift is
    /// removed before joining. Chains that remain separated by more than
    /// [`JOIN_TOL`] (the genuine discontinuities of the polar chart across
    /// the fold meridians) stay separate.
    pub fn chains(&self) -> Vec<Vec<(f64, f64)>> {
        let mut chains: Vec<Vec<(f64, f64)>> = Vec::new();
        for piece in &self.pieces {
            let pts: Vec<(f64, f64)> = piece.poly.iter().map(|&(_, p)| p).collect();
            if pts.is_empty() {
                continue;
            }
            let mut appended = false;
            if let Some(last) = chains.last_mut() {
                let lp = *last.last().unwrap();
                let shift = 2.0 * ((lp.0 - pts[0].0) / 2.0).round();
                let first = (pts[0].0 + shift, pts[0].1);
                if dist(lp, first) <= JOIN_TOL {
                    for &p in &pts {
                        let q = (p.0 + shift, p.1);
                        if dist(*last.last().unwrap(), q) > 1e-13 {
                            last.push(q);
                        }
                    }
                    appended = true;
                }
            }
            if !appended {
                let mut ch = Vec::with_capacity(pts.len());
                for &p in &pts {
                    if ch.last().map_or(true, |&q| dist(q, p) > 1e-13) {
                        ch.push(p);
                    }
                }
                if ch.len() >= 2 {
                    chains.push(ch);
                } else if !ch.is_empty() {
                    chains.push(ch);
                }
            }
        }
        merge_chains(&mut chains);
        chains.retain(|c| c.len() >= 2);
        chains
    }
}

/// Repeatedly merges chains whose end matches another chain's start (up to
/// an even shift in `x`).
fn merge_chains(chains: &mut Vec<Vec<(f64, f64)>>) {
    let mut changed = true;
    while changed {
        changed = false;
        'outer: for i in 0..chains.len() {
            for j in 0..chains.len() {
                if i == j {
                    continue;
                }
                let end = *chains[i].last().unwrap();
                let start = chains[j][0];
                let shift = 2.0 * ((end.0 - start.0) / 2.0).round();
                if dist(end, (start.0 + shift, start.1)) <= JOIN_TOL {
                    let tail: Vec<(f64, f64)> =
                        chains[j].iter().map(|&p| (p.0 + shift, p.1)).collect();
                    for p in tail {
                        if dist(*chains[i].last().unwrap(), p) > 1e-13 {
                            chains[i].push(p);
                        }
                    }
                    chains.remove(j);
                    changed = true;
                    break 'outer;
                }
            }
        }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn polyline_length(pts: &[(f64, f64)]) -> f64 {
    pts.windows(2).map(|w| dist(w[0], w[1])).sum()
}

/// Adaptive polyline sampling of `f` over `[t0, t1]` down to [`EPS_STEP`]
/// chord spacing.
fn build_poly<F: Fn(f64) -> (f64, f64)>(f: &F, t0: f64, t1: f64) -> Vec<(f64, (f64, f64))> {
    let mut out = Vec::new();
    out.push((t0, f(t0)));
    let n0 = 8;
    for i in 0..n0 {
        let a = t0 + (t1 - t0) * i as f64 / n0 as f64;
        let b = t0 + (t1 - t0) * (i + 1) as f64 / n0 as f64;
        refine_into(f, a, f(a), b, f(b), 0, &mut out);
    }
    out
}

fn refine_into<F: Fn(f64) -> (f64, f64)>(
    f: &F,
    a: f64,
    pa: (f64, f64),
    b: f64,
    pb: (f64, f64),
    depth: u32,
    out: &mut Vec<(f64, (f64, f64))>,
) {
    if dist(pa, pb) < EPS_STEP || depth >= 28 {
        out.push((b, pb));
        return;
    }
    let m = 0.5 * (a + b);
    let pm = f(m);
    refine_into(f, a, pa, m, pm, depth + 1, out);
    refine_into(f, m, pm, b, pb, depth + 1, out);
}

fn seg_piece(a: (f64, f64), b: (f64, f64), region: Region, branch: Option<Branch>) -> CurvePiece {
    CurvePiece {
        kind: PieceKind::Seg { a, b },
        region: Some(region),
        branch,
        t0: 0.0,
        t1: 1.0,
        poly: vec![(0.0, a), (1.0, b)],
    }
}

/// Builds the projected boundary of `c` as a planar curve: exact segments
/// for pole-centered and pole-through caps, analytic branch arcs split at
/// region crossings (`cos(theta) = ±2/3`), polar quadrant meridians, and the
/// seam meridian otherwise.
pub fn projected_cap_boundary(c: &Cap) -> Result<PlanarCurve, CurveError> {
    if c.t.abs() >= 1.0 {
        return Err(CurveError::DegenerateCap);
    }
    match c.kind() {
        CapKind::PoleCentered => Ok(pole_centered_boundary(c)),
        CapKind::BothPoles => Ok(both_poles_boundary(c)),
        CapKind::Generic => generic_boundary(c),
    }
}

fn pole_centered_boundary(c: &Cap) -> PlanarCurve {
    // Boundary parallel z = t for the north-centered cap, z = -t for the
    // south-centered one.
    let z0 = if c.w.z > 0.0 { c.t } else { -c.t };
    if z0.abs() <= TRANSITION_Z {
        let y = 3.0 * z0 / 8.0;
        return PlanarCurve {
            pieces: vec![seg_piece((0.0, y), (2.0, y), Region::Equatorial, None)],
        };
    }
    let north = z0 > 0.0;
    let sigma = (3.0 * (1.0 - z0.abs())).sqrt();
    let y = (2.0 - sigma) / 4.0 * if north { 1.0 } else { -1.0 };
    let region = if north { Region::NorthPolar } else { Region::SouthPolar };
    let pieces = (0..4)
        .map(|k| {
            let k = k as f64;
            let a = (k / 2.0 + (1.0 - sigma) / 4.0, y);
            let b = ((k + 1.0) / 2.0 - (1.0 - sigma) / 4.0, y);
            seg_piece(a, b, region, None)
        })
        .collect();
    PlanarCurve { pieces }
}

fn both_poles_boundary(c: &Cap) -> PlanarCurve {
    // Great circle through both poles: the meridian pair phi_w ± pi/2, each
    // of which projects to a 3-segment polygonal path from pole apex to
    // pole apex.
    let r = c.reduced();
    let mut pieces = Vec::with_capacity(6);
    for branch in [Branch::Plus, Branch::Minus] {
        let phi = wrap_phi(r.phi_w + FRAC_PI_2 + if branch == Branch::Minus { PI } else { 0.0 });
        let k = quadrant(phi).0 as f64;
        let xa = k / 2.0 + 0.25;
        let xb = phi / PI;
        pieces.push(seg_piece((xa, 0.5), (xb, 0.25), Region::NorthPolar, Some(branch)));
        pieces.push(seg_piece((xb, 0.25), (xb, -0.25), Region::Equatorial, Some(branch)));
        pieces.push(seg_piece((xb, -0.25), (xa, -0.5), Region::SouthPolar, Some(branch)));
    }
    PlanarCurve { pieces }
}

fn generic_boundary(c: &Cap) -> Result<PlanarCurve, CurveError> {
    let r = c.reduced();
    let (lo0, hi0) = c.boundary_theta_range();
    let lo = lo0.max(1e-7);
    let hi = hi0.min(PI - 1e-7);
    if hi - lo < 1e-9 {
        return Err(CurveError::DegenerateCap);
    }
    let mut pieces = Vec::new();
    for branch in [Branch::Plus, Branch::Minus] {
        let mut cuts = vec![lo, hi];
        for cv in [TRANSITION_Z, -TRANSITION_Z] {
            let th = cv.acos();
            if th > lo + 1e-9 && th < hi - 1e-9 {
                cuts.push(th);
            }
        }
        // Meridian crossings phi(theta) = k*pi/2: cut in the polar charts
        // (fold lines) and at the seam meridian k = 0.
        for kk in 0..4u32 {
            let mut d = kk as f64 * FRAC_PI_2 - r.phi_w;
            d -= 2.0 * PI * (d / (2.0 * PI)).round();
            if d.abs() < 1e-12 || (d.abs() - PI).abs() < 1e-12 {
                continue;
            }
            if d.signum() != branch.sign() {
                continue;
            }
            let cd = d.cos();
            let rr = r.cw.hypot(r.sw * cd);
            if r.t.abs() > rr {
                continue;
            }
            let alpha = (r.sw * cd).atan2(r.cw);
            let da = (r.t / rr).clamp(-1.0, 1.0).acos();
            for th in [alpha - da, alpha + da] {
                if th > lo + 1e-9 && th < hi - 1e-9 {
                    let in_polar = th.cos().abs() > TRANSITION_Z - 1e-9;
                    if in_polar || kk == 0 {
                        cuts.push(th);
                    }
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let windows: Vec<(f64, f64)> = match branch {
            Branch::Plus => cuts.windows(2).map(|w| (w[0], w[1])).collect(),
            Branch::Minus => cuts.windows(2).rev().map(|w| (w[1], w[0])).collect(),
        };
        for (t0, t1) in windows {
            let tm = 0.5 * (t0 + t1);
            let cm = tm.cos();
            let (chart, reduced_region) = if cm.abs() <= TRANSITION_Z {
                (Chart::Belt, Region::Equatorial)
            } else {
                let north = cm > 0.0;
                let raw = ((r.t - cm * r.cw) / (tm.sin() * r.sw)).clamp(-1.0, 1.0);
                let phim = r.phi_w + branch.sign() * raw.acos();
                let w = wrap_phi(phim);
                let k = quadrant(w).0;
                let phi_shift = 2.0 * PI * ((w - phim) / (2.0 * PI)).round();
                let region = if north { Region::NorthPolar } else { Region::SouthPolar };
                (Chart::Polar { k, phi_shift, north }, region)
            };
            let region = if r.flipped {
                match reduced_region {
                    Region::NorthPolar => Region::SouthPolar,
                    Region::SouthPolar => Region::NorthPolar,
                    Region::Equatorial => Region::Equatorial,
                }
            } else {
                reduced_region
            };
            let arc = ArcPiece {
                phi_w: r.phi_w,
                cw: r.cw,
                sw: r.sw,
                t: r.t,
                sign: branch.sign(),
                flip: r.flipped,
                chart,
            };
            let poly = build_poly(&|th| arc.eval(th), t0, t1);
            pieces.push(CurvePiece {
                kind: PieceKind::Arc(arc),
                region: Some(region),
                branch: Some(branch),
                t0,
                t1,
                poly,
            });
        }
    }
    Ok(PlanarCurve { pieces })
}

/// Curve length: exact for segments, adaptive chord refinement (successive
/// refinements within `1e-10` per piece) for analytic arcs, chord sum for
/// polyline pieces.
pub fn curve_length(b: &PlanarCurve) -> f64 {
    b.pieces
        .iter()
        .map(|p| match &p.kind {
            PieceKind::Seg { a, b } => dist(*a, *b),
            PieceKind::Arc(arc) => {
                adaptive_length(&|t| arc.eval(t), p.t0, arc.eval(p.t0), p.t1, arc.eval(p.t1), 1e-10, 0)
            }
            PieceKind::Poly => p.poly.windows(2).map(|w| dist(w[0].1, w[1].1)).sum(),
        })
        .sum()
}

fn adaptive_length<F: Fn(f64) -> (f64, f64)>(
    f: &F,
    a: f64,
    pa: (f64, f64),
    b: f64,
    pb: (f64, f64),
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let pm = f(m);
    let l0 = dist(pa, pb);
    let l1 = dist(pa, pm) + dist(pm, pb);
    if (l1 - l0).abs() < tol || depth >= 40 {
        // Richardson extrapolation of the chord-length estimate.
        return l1 + (l1 - l0) / 3.0;
    }
    adaptive_length(f, a, pa, m, pm, tol / 2.0, depth + 1)
        + adaptive_length(f, m, pm, b, pb, tol / 2.0, depth + 1)
}

/// Signed curvature of the projected boundary in the equatorial chart, for
/// the reduced symmetry form, parametrized by `theta` on the plus branch.
///
/// The expression is an `A`-balanced rearrangement of the closed form that
/// extends continuously across `A = 0`.
pub fn curvature_equatorial(theta: f64, theta_w: f64, t: f64) -> Result<f64, CurveError> {
    let (sw, cw) = theta_w.sin_cos();
    if sw.abs() < 1e-12 {
        // Pole-centered: the projected parallel is a horizontal line.
        return Ok(0.0);
    }
    if t.abs() < 1e-12 && cw.abs() < 1e-12 {
        // Through both poles: the belt part is a vertical line.
        return Ok(0.0);
    }
    let (s, ct) = theta.sin_cos();
    if ct.abs() > TRANSITION_Z + 1e-12 {
        return Err(CurveError::SingularParameter { theta, reason: "outside the equatorial chart" });
    }
    let a2 = ((theta - theta_w).cos() - t) * (t - (theta + theta_w).cos());
    if a2 < -1e-12 {
        return Err(CurveError::SingularParameter { theta, reason: "outside the parameter domain" });
    }
    let a2 = a2.max(0.0);
    let s2 = s * s;
    let num = (3.0 * PI * PI / 8.0)
        * s2
        * (2.0 * cw * ct * a2 + s2 * (ct - t * cw) * (cw - t * ct) - t * (1.0 + ct * ct) * a2);
    let den = ((cw - t * ct).powi(2) + (9.0 * PI * PI / 64.0) * a2 * s2 * s2).powf(1.5);
    if den < 1e-300 {
        return Err(CurveError::SingularParameter { theta, reason: "vanishing speed" });
    }
    Ok(num / den)
}

/// Signed curvature in the north polar chart for the reduced form, plus
/// branch, including the continuous extension down to `theta = 0` when the
/// pole lies on the boundary (`cos(theta_w) = t`).
pub fn curvature_polar(theta: f64, theta_w: f64, phi_w: f64, t: f64) -> Result<f64, CurveError> {
    let (sw, cw) = theta_w.sin_cos();
    if sw.abs() < 1e-12 {
        return Ok(0.0);
    }
    if theta.cos() < TRANSITION_Z - 1e-12 {
        return Err(CurveError::SingularParameter { theta, reason: "outside the north polar chart" });
    }
    polar_kappa_core(theta, cw, sw, t, phi_w)
}

/// Polar-chart curvature without the region precondition; also used for the
/// south region through the mirror substitution `cw -> -cw`,
/// `theta -> pi - theta`.
fn polar_kappa_core(theta: f64, cw: f64, sw: f64, t: f64, phi_w: f64) -> Result<f64, CurveError> {
    let sqrt6 = 6.0f64.sqrt();
    let yp = -(theta / 2.0).cos() * sqrt6 / 8.0;
    let ypp = (theta / 2.0).sin() * sqrt6 / 16.0;
    let (phi, phi_p, phi_pp) = if (cw - t).abs() < 1e-9 && cw > 0.0 {
        // Pole on the boundary: theta = 0 is a regular point of the
        // projected curve; use the tangent-half-angle form.
        let tau = t / (1.0 - t * t).sqrt();
        let tt = (theta / 2.0).tan();
        let m2 = 1.0 - tau * tau * tt * tt;
        if m2 < 1e-12 {
            return Err(CurveError::SingularParameter { theta, reason: "parametrization endpoint" });
        }
        let root = m2.sqrt();
        let sec2 = 1.0 + tt * tt;
        let phi_p = -tau * sec2 / (2.0 * root);
        let phi_pp = -(tau * tt * sec2 / (2.0 * root)) * (tau * tau * sec2 / (2.0 * m2) + 1.0);
        let phi = phi_w + (tau * tt).clamp(-1.0, 1.0).acos();
        (phi, phi_p, phi_pp)
    } else {
        let (s, ct) = theta.sin_cos();
        if s < 1e-12 {
            return Err(CurveError::SingularParameter { theta, reason: "pole off the boundary" });
        }
        let a2 = (1.0 - ct * ct) * (1.0 - cw * cw) - (t - ct * cw) * (t - ct * cw);
        if a2 <= 1e-14 {
            return Err(CurveError::SingularParameter { theta, reason: "parametrization endpoint" });
        }
        let a = a2.sqrt();
        let phi_p = -(cw - t * ct) / (a * s);
        let phi_pp = (ct - t * cw) * (cw - t * ct) / (a2 * a) - (t - cw * ct) / (a * s * s);
        let raw = ((t - ct * cw) / (s * sw)).clamp(-1.0, 1.0);
        let phi = phi_w + raw.acos();
        (phi, phi_p, phi_pp)
    };
    let w = wrap_phi(phi);
    let k = quadrant(w).0 as f64;
    let phi_m = w - k * FRAC_PI_2 - FRAC_PI_4;
    let xp = (16.0 * phi_p * ypp - 4.0 * yp * phi_m) / PI;
    let num = (16.0 * phi_p * ypp * ypp - 16.0 * phi_pp * ypp * yp + 8.0 * yp * yp * phi_p) / PI;
    let speed2 = xp * xp + yp * yp;
    if speed2 < 1e-24 {
        return Err(CurveError::NonRegularCurve);
    }
    Ok(num / speed2.powf(1.5))
}

/// Verified curvature sign changes of one parametrization branch, per
/// projection region (reported for the original, unflipped cap).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurvatureZeroCounts {
    pub equatorial: usize,
    pub north_polar: usize,
    pub south_polar: usize,
}

impl CurvatureZeroCounts {
    /// Total sign-change budget over both parametrization branches: the two
    /// branches share their zeros at equal heights, so the per-branch sum is
    /// doubled.
    pub fn total(&self) -> usize {
        2 * (self.equatorial + self.north_polar + self.south_polar)
    }
}

/// Counts curvature sign changes by isolating the real roots of the
/// closed-form condition polynomials in `cos(theta)` (degree <= 4
/// equatorial, <= 5 polar) and keeping only roots across which the directly
/// evaluated curvature changes sign.
pub fn curvature_zero_count(c: &Cap) -> Result<CurvatureZeroCounts, CurveError> {
    if c.t.abs() >= 1.0 || c.kind() != CapKind::Generic {
        return Err(CurveError::DegenerateCap);
    }
    let r = c.reduced();
    let (cw, sw, t) = (r.cw, r.sw, r.t);
    let (lo0, hi0) = c.boundary_theta_range();
    let lo = lo0.max(1e-7);
    let hi = hi0.min(PI - 1e-7);

    // A^2 as a polynomial in c = cos(theta).
    let a2 = poly_sub(
        &poly_scale(&[1.0, 0.0, -1.0], 1.0 - cw * cw),
        &poly_mul(&[t, -cw], &[t, -cw]),
    );
    let h = 1e-5;

    // Equatorial condition quartic.
    let mut equatorial = 0;
    {
        let p1 = poly_scale(&poly_mul(&[0.0, 1.0], &a2), 2.0 * cw);
        let p2 = poly_mul(&poly_mul(&[1.0, 0.0, -1.0], &[-t * cw, 1.0]), &[cw, -t]);
        let p3 = poly_scale(&poly_mul(&[1.0, 0.0, 1.0], &a2), -t);
        let p = poly_add(&poly_add(&p1, &p2), &p3);
        let clo = (-TRANSITION_Z).max(hi.cos()) + 1e-9;
        let chi = TRANSITION_Z.min(lo.cos()) - 1e-9;
        if chi > clo {
            for root in real_roots(&p, clo, chi) {
                let th = root.clamp(-1.0, 1.0).acos();
                let km = curvature_equatorial(th - h, r.theta_w, t);
                let kp = curvature_equatorial(th + h, r.theta_w, t);
                if let (Ok(a), Ok(b)) = (km, kp) {
                    if a * b < 0.0 {
                        equatorial += 1;
                    }
                }
            }
        }
    }

    // Polar condition polynomial (degree <= 5 before trimming), north chart;
    // the south chart is the mirror cw -> -cw in c = -cos(theta).
    let polar_poly = |cwx: f64| -> Vec<f64> {
        let a2x = poly_sub(
            &poly_scale(&[1.0, 0.0, -1.0], 1.0 - cwx * cwx),
            &poly_mul(&[t, -cwx], &[t, -cwx]),
        );
        let q1 = poly_scale(
            &poly_mul(&poly_mul(&[1.0, 0.0, -1.0], &[-t * cwx, 1.0]), &[cwx, -t]),
            2.0,
        );
        let q2 = poly_scale(&poly_mul(&a2x, &[t, -cwx]), -2.0);
        let q3 = poly_scale(&poly_mul(&poly_mul(&[3.0, 1.0], &[cwx, -t]), &a2x), -1.0);
        poly_add(&poly_add(&q1, &q2), &q3)
    };

    let mut north_polar = 0;
    {
        let cmax = lo.cos() - 1e-9;
        let cmin = TRANSITION_Z.max(hi.cos()) + 1e-9;
        if cmax > cmin {
            for root in real_roots(&polar_poly(cw), cmin, cmax) {
                let th = root.clamp(-1.0, 1.0).acos();
                let km = polar_kappa_core(th - h, cw, sw, t, r.phi_w);
                let kp = polar_kappa_core(th + h, cw, sw, t, r.phi_w);
                if let (Ok(a), Ok(b)) = (km, kp) {
                    if a * b < 0.0 {
                        north_polar += 1;
                    }
                }
            }
        }
    }

    let mut south_polar = 0;
    {
        // Mirrored coordinate ct2 = -cos(theta) in (2/3, -cos(hi)).
        let cmax = -hi.cos() - 1e-9;
        let cmin = TRANSITION_Z + 1e-9;
        if cmax > cmin {
            for root in real_roots(&polar_poly(-cw), cmin, cmax) {
                let th = root.clamp(-1.0, 1.0).acos();
                let km = polar_kappa_core(th - h, -cw, sw, t, r.phi_w);
                let kp = polar_kappa_core(th + h, -cw, sw, t, r.phi_w);
                if let (Ok(a), Ok(b)) = (km, kp) {
                    if a * b < 0.0 {
                        south_polar += 1;
                    }
                }
            }
        }
    }

    if r.flipped {
        std::mem::swap(&mut north_polar, &mut south_polar);
    }
    Ok(CurvatureZeroCounts { equatorial, north_polar, south_polar })
}

// ---- small dense polynomial helpers (ascending coefficients) ----

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, &y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    poly_add(a, &poly_scale(b, -1.0))
}

fn poly_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|&x| x * s).collect()
}

fn poly_eval(a: &[f64], x: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_deriv(a: &[f64]) -> Vec<f64> {
    a.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect()
}

fn poly_trim(mut a: Vec<f64>) -> Vec<f64> {
    let scale = a.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let tol = scale * 1e-14;
    while a.len() > 1 && a.last().unwrap().abs() <= tol {
        a.pop();
    }
    a
}

/// Real roots of `a` in `[lo, hi]` via recursive critical-point isolation
/// and bisection.
fn real_roots(a: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let a = poly_trim(a.to_vec());
    if a.len() <= 1 {
        return Vec::new();
    }
    if a.len() == 2 {
        let r = -a[0] / a[1];
        return if (lo..=hi).contains(&r) { vec![r] } else { Vec::new() };
    }
    let mut nodes = vec![lo];
    nodes.extend(real_roots(&poly_deriv(&a), lo, hi));
    nodes.push(hi);
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let scale = a.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let mut roots = Vec::new();
    for w in nodes.windows(2) {
        let (mut x0, mut x1) = (w[0], w[1]);
        if x1 - x0 < 1e-15 {
            continue;
        }
        let (f0, f1) = (poly_eval(&a, x0), poly_eval(&a, x1));
        if f0.abs() <= scale * 1e-14 {
            if roots.last().map_or(true, |&r: &f64| (x0 - r).abs() > 1e-10) {
                roots.push(x0);
            }
            continue;
        }
        if f0 * f1 > 0.0 {
            continue;
        }
        let mut s0 = f0;
        for _ in 0..80 {
            let m = 0.5 * (x0 + x1);
            let fm = poly_eval(&a, m);
            if s0 * fm <= 0.0 {
                x1 = m;
            } else {
                x0 = m;
                s0 = fm;
            }
        }
        let r = 0.5 * (x0 + x1);
        if roots.last().map_or(true, |&q: &f64| (r - q).abs() > 1e-10) {
            roots.push(r);
        }
    }
    roots
}

// ---- self-intersections, sub-spirals, convex decomposition ----

#[derive(Debug, Clone, Copy)]
struct Crossing {
    a: (usize, usize, f64),
    b: (usize, usize, f64),
    #[allow(dead_code)]
    p: (f64, f64),
}

/// Transversal self-intersections among the chain polylines (planar
/// tolerance `1e-10`). Adjacent segments and the closure pair of a closed
/// chain are excluded.
fn chain_self_intersections(chains: &[Vec<(f64, f64)>]) -> Vec<Crossing> {
    struct SegRef {
        chain: usize,
        seg: usize,
        a: (f64, f64),
        b: (f64, f64),
    }
    let mut segs = Vec::new();
    for (ci, ch) in chains.iter().enumerate() {
        for (si, w) in ch.windows(2).enumerate() {
            segs.push(SegRef { chain: ci, seg: si, a: w[0], b: w[1] });
        }
    }
    let cell = segs
        .iter()
        .map(|s| dist(s.a, s.b))
        .fold(0.0f64, f64::max)
        .max(1e-6);
    let key = |p: (f64, f64)| ((p.0 / cell).floor() as i64, (p.1 / cell).floor() as i64);
    let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
    for (i, s) in segs.iter().enumerate() {
        let (k0, k1) = (key(s.a), key(s.b));
        for gx in k0.0.min(k1.0)..=k0.0.max(k1.0) {
            for gy in k0.1.min(k1.1)..=k0.1.max(k1.1) {
                grid.entry((gx, gy)).or_default().push(i);
            }
        }
    }
    let closed: Vec<bool> = chains
        .iter()
        .map(|ch| dist(ch[0], *ch.last().unwrap()) <= 1e-9)
        .collect();
    let mut out: Vec<Crossing> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    for bucket in grid.values() {
        for (ii, &i) in bucket.iter().enumerate() {
            for &j in &bucket[ii + 1..] {
                let (i, j) = (i.min(j), i.max(j));
                if !seen.insert((i, j)) {
                    continue;
                }
                let (si, sj) = (&segs[i], &segs[j]);
                if si.chain == sj.chain {
                    let nseg = chains[si.chain].len() - 1;
                    let gap = sj.seg - si.seg;
                    if gap <= 1 {
                        continue;
                    }
                    if closed[si.chain] && si.seg == 0 && sj.seg == nseg - 1 {
                        continue;
                    }
                }
                if let Some((ti, tj, p)) = seg_intersection(si.a, si.b, sj.a, sj.b) {
                    if out.iter().all(|c| dist(c.p, p) > 1e-9) {
                        out.push(Crossing {
                            a: (si.chain, si.seg, ti),
                            b: (sj.chain, sj.seg, tj),
                            p,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Proper intersection of two segments with tolerance `1e-10` at the ends.
fn seg_intersection(
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
    d: (f64, f64),
) -> Option<(f64, f64, (f64, f64))> {
    let r = (b.0 - a.0, b.1 - a.1);
    let s = (d.0 - c.0, d.1 - c.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom.abs() < 1e-15 {
        return None;
    }
    let qp = (c.0 - a.0, c.1 - a.1);
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
    let tol = 1e-10;
    if t < -tol || t > 1.0 + tol || u < -tol || u > 1.0 + tol {
        return None;
    }
    let p = (a.0 + t * r.0, a.1 + t * r.1);
    Some((t.clamp(0.0, 1.0), u.clamp(0.0, 1.0), p))
}

/// Splits the chains of `b` at curvature sign changes (discrete turning
/// sign, zero band `1e-8`) and at self-intersection points, so that each
/// returned curve is a sub-spiral: single-signed curvature, no
/// self-intersection.
pub fn subspiral_split(b: &PlanarCurve) -> Vec<PlanarCurve> {
    let chains = b.chains();
    let crossings = chain_self_intersections(&chains);
    subspiral_polylines(&chains, &crossings)
        .into_iter()
        .map(|p| PlanarCurve::from_polyline(&p))
        .collect()
}

fn subspiral_polylines(chains: &[Vec<(f64, f64)>], crossings: &[Crossing]) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (ci, ch) in chains.iter().enumerate() {
        // Positions along the chain: vertex i is position i, a point inside
        // segment s at fraction f is position s + f.
        let mut splits: Vec<f64> = Vec::new();
        for cr in crossings {
            for &(chain, seg, frac) in [&cr.a, &cr.b] {
                if chain == ci {
                    splits.push(seg as f64 + frac);
                }
            }
        }
        let mut last_sign = 0.0;
        for i in 1..ch.len() - 1 {
            let v1 = (ch[i].0 - ch[i - 1].0, ch[i].1 - ch[i - 1].1);
            let v2 = (ch[i + 1].0 - ch[i].0, ch[i + 1].1 - ch[i].1);
            let n = (v1.0.hypot(v1.1)) * (v2.0.hypot(v2.1));
            if n < 1e-300 {
                continue;
            }
            let s = (v1.0 * v2.1 - v1.1 * v2.0) / n;
            if s.abs() < TURN_ZERO_BAND {
                continue;
            }
            let sign = s.signum();
            if last_sign != 0.0 && sign != last_sign {
                splits.push(i as f64);
            }
            last_sign = sign;
        }
        splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
        splits.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        splits.retain(|&p| p > 1e-9 && p < (ch.len() - 1) as f64 - 1e-9);
        let mut bounds = vec![0.0];
        bounds.extend(splits);
        bounds.push((ch.len() - 1) as f64);
        for w in bounds.windows(2) {
            let piece = extract_subpolyline(ch, w[0], w[1]);
            if piece.len() >= 2 && polyline_length(&piece) > 1e-12 {
                out.push(piece);
            }
        }
    }
    out
}

fn point_at(ch: &[(f64, f64)], pos: f64) -> (f64, f64) {
    let seg = (pos.floor() as usize).min(ch.len() - 2);
    let f = pos - seg as f64;
    let (a, b) = (ch[seg], ch[seg + 1]);
    (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1))
}

fn extract_subpolyline(ch: &[(f64, f64)], p0: f64, p1: f64) -> Vec<(f64, f64)> {
    let mut out = vec![point_at(ch, p0)];
    let first = p0.floor() as usize + 1;
    let last = p1.ceil() as usize;
    for i in first..last.min(ch.len()) {
        let pos = i as f64;
        if pos > p0 + 1e-12 && pos < p1 - 1e-12 {
            let p = ch[i];
            if dist(*out.last().unwrap(), p) > 1e-13 {
                out.push(p);
            }
        }
    }
    let end = point_at(ch, p1);
    if dist(*out.last().unwrap(), end) > 1e-13 {
        out.push(end);
    }
    out
}

/// An `n`-convex decomposition: split parameters (cumulative arc length over
/// the chain decomposition) and the self-intersection count.
#[derive(Debug, Clone)]
pub struct ConvexDecomposition {
    pub n: usize,
    pub splits: Vec<f64>,
    pub self_intersections: usize,
}

/// Decomposes the curve into convex pieces: sub-spiral splitting followed by
/// the two tangent-ray-shooting passes (forward and on the reversed curve)
/// on every sub-spiral.
pub fn convex_decomposition(b: &PlanarCurve) -> Result<ConvexDecomposition, CurveError> {
    let chains = b.chains();
    for ch in &chains {
        if ch.len() < 2 || polyline_length(ch) < 1e-12 {
            return Err(CurveError::NonRegularCurve);
        }
    }
    if chains.is_empty() {
        return Err(CurveError::NonRegularCurve);
    }
    let crossings = chain_self_intersections(&chains);
    let subs = subspiral_polylines(&chains, &crossings);
    let mut splits = vec![0.0];
    let mut offset = 0.0;
    for sp in &subs {
        let len = polyline_length(sp);
        let mut local = loop_splits(sp)?;
        local.extend(loop_splits(&reversed(sp))?.into_iter().map(|s| len - s));
        local.sort_by(|a, b| a.partial_cmp(b).unwrap());
        local.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        local.retain(|&s| s > 1e-9 && s < len - 1e-9);
        splits.extend(local.into_iter().map(|s| offset + s));
        offset += len;
        splits.push(offset);
    }
    splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    splits.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let n = splits.len() - 1;
    Ok(ConvexDecomposition { n, splits, self_intersections: crossings.len() })
}

fn reversed(p: &[(f64, f64)]) -> Vec<(f64, f64)> {
    p.iter().rev().copied().collect()
}

/// One ray-shooting pass: from the current split point shoot the
/// backward-tangent half-line, take the minimal-distance intersection with
/// the remainder of the curve, emit it as a split, and continue from there.
fn loop_splits(ch: &[(f64, f64)]) -> Result<Vec<f64>, CurveError> {
    let mut cum = Vec::with_capacity(ch.len());
    let mut s = 0.0;
    cum.push(0.0);
    for w in ch.windows(2) {
        s += dist(w[0], w[1]);
        cum.push(s);
    }
    let total = s;
    let mut splits = Vec::new();
    let mut cur_seg = 0usize;
    let mut cur_frac = 0.0f64;
    let mut iters = 0;
    loop {
        iters += 1;
        if iters > 200 {
            return Err(CurveError::RayLimit);
        }
        let p0 = point_at(ch, cur_seg as f64 + cur_frac);
        let fwd = (ch[cur_seg + 1].0 - ch[cur_seg].0, ch[cur_seg + 1].1 - ch[cur_seg].1);
        let norm = fwd.0.hypot(fwd.1);
        if norm < 1e-300 {
            return Err(CurveError::NonRegularCurve);
        }
        let dir = (-fwd.0 / norm, -fwd.1 / norm);
        // Minimal-rho hit against segments past a short exclusion window.
        let mut best: Option<(f64, usize, f64)> = None;
        for seg in (cur_seg + 3).min(ch.len() - 1)..ch.len() - 1 {
            let (a, b) = (ch[seg], ch[seg + 1]);
            let e = (b.0 - a.0, b.1 - a.1);
            let denom = dir.0 * e.1 - dir.1 * e.0;
            if denom.abs() < 1e-15 {
                continue;
            }
            let ap = (a.0 - p0.0, a.1 - p0.1);
            let rho = (ap.0 * e.1 - ap.1 * e.0) / denom;
            let u = (ap.0 * dir.1 - ap.1 * dir.0) / denom;
            if rho <= 1e-9 || !(0.0..=1.0).contains(&u) {
                continue;
            }
            if best.map_or(true, |(r, _, _)| rho < r) {
                best = Some((rho, seg, u));
            }
        }
        match best {
            None => break,
            Some((_, seg, u)) => {
                let arc = cum[seg] + u * (cum[seg + 1] - cum[seg]);
                if total - arc < 1e-9 {
                    break;
                }
                splits.push(arc);
                cur_seg = seg;
                cur_frac = u;
                if cur_seg >= ch.len() - 1 {
                    break;
                }
            }
        }
    }
    Ok(splits)
}

/// Maximum distance from the points to the boundary of their convex hull;
/// a convex polyline scores (numerically) zero.
pub fn convexity_defect(points: &[(f64, f64)]) -> f64 {
    if points.len() <= 2 {
        return 0.0;
    }
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| dist(*a, *b) < 1e-15);
    if pts.len() <= 2 {
        return 0.0;
    }
    let cross =
        |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 2 {
        return 0.0;
    }
    let seg_dist = |p: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        let e = (b.0 - a.0, b.1 - a.1);
        let l2 = e.0 * e.0 + e.1 * e.1;
        if l2 < 1e-300 {
            return dist(p, a);
        }
        let t = (((p.0 - a.0) * e.0 + (p.1 - a.1) * e.1) / l2).clamp(0.0, 1.0);
        dist(p, (a.0 + t * e.0, a.1 + t * e.1))
    };
    points
        .iter()
        .map(|&p| {
            (0..hull.len())
                .map(|i| seg_dist(p, hull[i], hull[(i + 1) % hull.len()]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Exact count of lattice tiling cells touched by the curve.
///
/// Each chain is mapped to cell coordinates (`Q^{-1}(Kp - v)`, unit cells)
/// and walked segment by segment: the start cell, the cell of every
/// sub-interval between grid-line crossings, and — when an `x` and `y`
/// crossing coincide — the cell whose corner is passed through. The final
/// endpoint of each chain is excluded (half-open traversal; lossless for
/// closed chains).
pub fn lattice_intersection_count(b: &PlanarCurve, lat: &LatticeSpec) -> usize {
    let mut cells: HashSet<(i64, i64)> = HashSet::new();
    let floor_cell = |p: (f64, f64)| (p.0.floor() as i64, p.1.floor() as i64);
    for ch in b.chains() {
        let pts: Vec<(f64, f64)> = ch.iter().map(|&p| lat.to_cell_coords(p)).collect();
        for w in pts.windows(2) {
            let (a, b2) = (w[0], w[1]);
            cells.insert(floor_cell(a));
            let mut txs = axis_crossings(a.0, b2.0);
            let mut tys = axis_crossings(a.1, b2.1);
            for &tx in &txs {
                for &ty in &tys {
                    if (tx - ty).abs() < 1e-12 {
                        let t = 0.5 * (tx + ty);
                        let p = (a.0 + t * (b2.0 - a.0), a.1 + t * (b2.1 - a.1));
                        cells.insert((p.0.round() as i64, p.1.round() as i64));
                    }
                }
            }
            let mut ts = vec![0.0];
            ts.append(&mut txs);
            ts.append(&mut tys);
            ts.push(1.0);
            ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for w2 in ts.windows(2) {
                let t = 0.5 * (w2[0] + w2[1]);
                let p = (a.0 + t * (b2.0 - a.0), a.1 + t * (b2.1 - a.1));
                cells.insert(floor_cell(p));
            }
        }
    }
    cells.len()
}

/// Parameters in `(0,1)` where the affine coordinate `a + t(b-a)` crosses
/// an integer.
fn axis_crossings(a: f64, b: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if (a - b).abs() < 1e-300 {
        return out;
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let mut n = lo.floor() + 1.0;
    while n < hi {
        if n > lo {
            let t = (n - a) / (b - a);
            if t > 1e-15 && t < 1.0 - 1e-15 {
                out.push(t);
            }
        }
        n += 1.0;
    }
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out
}

/// Pixels whose closure meets the cap boundary (closed-touch convention).
pub fn cap_pixel_intersection_count(c: &Cap, ell: Level) -> Result<usize, CurveError> {
    cap_pixel_intersection_count_with(c, ell, TouchConvention::Closed)
}

/// Pixel intersection counting with an explicit touch convention.
pub fn cap_pixel_intersection_count_with(
    c: &Cap,
    ell: Level,
    conv: TouchConvention,
) -> Result<usize, CurveError> {
    let n0 = 256usize.max(96 * (1usize << ell.ell()));
    cap_pixel_count_inner(c, ell, conv, n0)
}

/// Counting core with an explicit base sample count; doubling `n0` only
/// refines the sample grid, so counts are monotone along `n0 -> 2*n0`.
pub(crate) fn cap_pixel_count_inner(
    c: &Cap,
    ell: Level,
    conv: TouchConvention,
    n0: usize,
) -> Result<usize, CurveError> {
    if c.t.abs() >= 1.0 {
        return Err(CurveError::DegenerateCap);
    }
    let w = c.w;
    let aux = if w.z.abs() < 0.9 { (0.0, 0.0, 1.0) } else { (1.0, 0.0, 0.0) };
    let e1 = UnitVector::normalized(
        w.y * aux.2 - w.z * aux.1,
        w.z * aux.0 - w.x * aux.2,
        w.x * aux.1 - w.y * aux.0,
    )
    .expect("frame axis is independent of the cap center");
    let e2x = w.y * e1.z - w.z * e1.y;
    let e2y = w.z * e1.x - w.x * e1.z;
    let e2z = w.x * e1.y - w.y * e1.x;
    let s = (1.0 - c.t * c.t).sqrt();
    let point = |alpha: f64| -> SphericalAngles {
        let (sa, ca) = alpha.sin_cos();
        let x = c.t * w.x + s * (ca * e1.x + sa * e2x);
        let y = c.t * w.y + s * (ca * e1.y + sa * e2y);
        let z = c.t * w.z + s * (ca * e1.z + sa * e2z);
        UnitVector::normalized(x, y, z)
            .unwrap_or(UnitVector::NORTH)
            .to_angles()
    };
    // Small irrational phase so the uniform grid never lands exactly on
    // pixel corners of the symmetric test families; doubling `n0` keeps the
    // coarse grid a subset of the fine one.
    const PHASE: f64 = 6.180339887498949e-4;
    let mut found: HashSet<u64> = HashSet::new();
    let step = 2.0 * PI / n0 as f64;
    let samples: Vec<(f64, u64)> = (0..=n0)
        .map(|i| {
            let a = i as f64 * step + PHASE;
            (a, point_to_pixel(point(a), ell).ordinal())
        })
        .collect();
    for &(_, pix) in &samples {
        found.insert(pix);
    }
    struct Ctx<'a> {
        point: &'a dyn Fn(f64) -> SphericalAngles,
        ell: Level,
        conv: TouchConvention,
        found: HashSet<u64>,
    }
    fn refine(ctx: &mut Ctx, a: f64, pa: u64, b: f64, pb: u64, depth: u32) {
        if pa == pb {
            return;
        }
        if b - a < 1e-12 || depth >= 40 {
            if ctx.conv == TouchConvention::Closed {
                let p = (ctx.point)(0.5 * (a + b));
                for pix in pixels_touching(p, ctx.ell, 1e-8) {
                    ctx.found.insert(pix.ordinal());
                }
            }
            return;
        }
        let m = 0.5 * (a + b);
        let pm = point_to_pixel((ctx.point)(m), ctx.ell).ordinal();
        ctx.found.insert(pm);
        refine(ctx, a, pa, m, pm, depth + 1);
        refine(ctx, m, pm, b, pb, depth + 1);
    }
    let mut ctx = Ctx { point: &point, ell, conv, found };
    for w2 in samples.windows(2) {
        refine(&mut ctx, w2[0].0, w2[0].1, w2[1].0, w2[1].1, 0);
    }
    Ok(ctx.found.len())
}
