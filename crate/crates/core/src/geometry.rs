//! Points on the sphere, spherical caps, and the analytic parametrizations
//! of cap boundaries.
//!
//! Angles follow the convention `theta in [0, pi]` measured from the north
//! pole and `phi in [0, 2*pi)` measured from the positive x-axis, so a point
//! is `(cos(phi) sin(theta), sin(phi) sin(theta), cos(theta))`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

/// Tolerance for clamping arccos arguments that drifted past `[-1, 1]`.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("theta {theta} outside the boundary parametrization range [{lo}, {hi}]")]
    ThetaOutOfRange { theta: f64, lo: f64, hi: f64 },
    #[error("arccos argument {0} out of [-1,1] beyond tolerance")]
    ArccosDomain(f64),
    #[error("degenerate cap (|t| = 1)")]
    DegenerateCap,
}

/// A point on the unit sphere in angle form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphericalAngles {
    /// Azimuth in `[0, 2*pi)`.
    pub phi: f64,
    /// Colatitude (angle from the north pole) in `[0, pi]`.
    pub theta: f64,
}

/// A point on the unit sphere in Cartesian form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Normalizes an azimuth into `[0, 2*pi)`.
pub fn wrap_phi(phi: f64) -> f64 {
    let mut p = phi % TAU;
    if p < 0.0 {
        p += TAU;
    }
    // -1e-17 % tau rounds to tau itself.
    if p >= TAU {
        p = 0.0;
    }
    p
}

impl SphericalAngles {
    /// Builds an angle pair, wrapping `phi` into `[0, 2*pi)`.
    ///
    /// `theta` must already be in `[0, pi]`; values within `CLAMP_TOL`
    /// outside are clamped.
    pub fn new(phi: f64, theta: f64) -> Self {
        debug_assert!((-CLAMP_TOL..=PI + CLAMP_TOL).contains(&theta), "theta = {theta}");
        Self {
            phi: wrap_phi(phi),
            theta: theta.clamp(0.0, PI),
        }
    }

    pub fn to_unit_vector(self) -> UnitVector {
        let (sp, cp) = self.phi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        UnitVector {
            x: cp * st,
            y: sp * st,
            z: ct,
        }
    }

    pub fn cos_theta(self) -> f64 {
        self.theta.cos()
    }

    pub fn is_pole(self) -> bool {
        self.theta == 0.0 || self.theta == PI
    }
}

impl UnitVector {
    /// North pole `(0,0,1)`.
    pub const NORTH: UnitVector = UnitVector { x: 0.0, y: 0.0, z: 1.0 };
    /// South pole `(0,0,-1)`.
    pub const SOUTH: UnitVector = UnitVector { x: 0.0, y: 0.0, z: -1.0 };

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Option<UnitVector> {
        let n = (x * x + y * y + z * z).sqrt();
        if n < 1e-14 {
            return None;
        }
        Some(UnitVector { x: x / n, y: y / n, z: z / n })
    }

    pub fn dot(self, other: UnitVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(self) -> UnitVector {
        UnitVector { x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Inverse of [`SphericalAngles::to_unit_vector`]. Returns `phi = 0` at
    /// the poles.
    pub fn to_angles(self) -> SphericalAngles {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        let phi = if self.x == 0.0 && self.y == 0.0 {
            0.0
        } else {
            wrap_phi(self.y.atan2(self.x))
        };
        SphericalAngles { phi, theta }
    }
}

/// Which sign the `arccos` offset carries in the boundary parametrization:
/// `Plus` is `phi = phi_w + arccos(..)`, `Minus` is `phi = phi_w - arccos(..)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Spherical cap `C(w,t) = { x : <x,w> >= t }` with center `w` and height
/// `t in [-1, 1]`. Normalized area is `(1-t)/2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Cap {
    pub w: UnitVector,
    pub t: f64,
}

/// A cap brought into the reduced symmetry form `theta_w in [0, pi/2]`,
/// `t in [0, 1)` by (optionally) replacing `(w,t)` with `(-w,-t)` — same
/// boundary circle — and reflecting through the equator. Boundary
/// parametrizations are evaluated here and mapped back.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ReducedCap {
    pub phi_w: f64,
    pub theta_w: f64,
    pub t: f64,
    /// `cos(theta_w)` of the reduced center.
    pub cw: f64,
    /// `sin(theta_w)` of the reduced center.
    pub sw: f64,
    /// Whether the equator reflection (`theta -> pi - theta`) was applied.
    pub flipped: bool,
}

/// Cap kinds that need dedicated boundary handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CapKind {
    /// `w` is a pole: the boundary is one parallel.
    PoleCentered,
    /// `theta_w = pi/2` and `t = 0`: the boundary is a meridian pair.
    BothPoles,
    /// Generic boundary circle.
    Generic,
}

impl Cap {
    pub fn new(w: UnitVector, t: f64) -> Self {
        debug_assert!((-1.0..=1.0).contains(&t));
        Self { w, t }
    }

    /// Normalized surface measure of the cap, `(1 - t) / 2`.
    pub fn area_fraction(&self) -> f64 {
        (1.0 - self.t) / 2.0
    }

    /// Membership test. `closed` uses `<p,w> >= t`, open uses strict `>`.
    pub fn contains(&self, p: UnitVector, closed: bool) -> bool {
        let d = p.dot(self.w);
        if closed {
            d >= self.t
        } else {
            d > self.t
        }
    }

    pub fn center_angles(&self) -> SphericalAngles {
        self.w.to_angles()
    }

    pub(crate) fn reduced(&self) -> ReducedCap {
        let a = self.center_angles();
        let (mut phi_w, mut theta_w, mut t) = (a.phi, a.theta, self.t);
        if t < 0.0 {
            // Same boundary circle, complementary cap.
            phi_w = wrap_phi(phi_w + PI);
            theta_w = PI - theta_w;
            t = -t;
        }
        let mut flipped = false;
        if theta_w > FRAC_PI_2 {
            theta_w = PI - theta_w;
            flipped = true;
        }
        let (sw, cw) = theta_w.sin_cos();
        ReducedCap { phi_w, theta_w, t, cw, sw, flipped }
    }

    /// The `theta`-domain of the two boundary parametrization branches, in
    /// the reduced symmetry frame.
    pub fn boundary_theta_range(&self) -> (f64, f64) {
        let r = self.reduced();
        let alpha = r.t.clamp(-1.0, 1.0).acos();
        let lo = (alpha - r.theta_w).abs();
        let hi = (alpha + r.theta_w).min(PI);
        (lo.max(0.0), hi)
    }

    pub(crate) fn kind(&self) -> CapKind {
        let r = self.reduced();
        if r.sw < 1e-12 {
            CapKind::PoleCentered
        } else if r.t < 1e-12 && r.cw < 1e-12 {
            CapKind::BothPoles
        } else {
            CapKind::Generic
        }
    }

    /// Evaluates the boundary parametrization at `theta` (reduced frame) on
    /// the given branch, returning the angles of the boundary point on the
    /// original (unreduced) sphere.
    pub fn boundary_point(&self, theta: f64, branch: Branch) -> Result<SphericalAngles, GeometryError> {
        let r = self.reduced();
        let (lo, hi) = self.boundary_theta_range();
        if theta < lo - 1e-9 || theta > hi + 1e-9 {
            return Err(GeometryError::ThetaOutOfRange { theta, lo, hi });
        }
        let theta = theta.clamp(lo, hi);
        let point = r.boundary_point_reduced(theta, branch)?;
        Ok(r.unflip(point))
    }
}

impl ReducedCap {
    /// Maps a point computed in the reduced frame back to the original cap.
    pub(crate) fn unflip(&self, p: SphericalAngles) -> SphericalAngles {
        if self.flipped {
            SphericalAngles::new(p.phi, PI - p.theta)
        } else {
            p
        }
    }

    /// Boundary point in the reduced frame (no equator reflection applied).
    pub(crate) fn boundary_point_reduced(
        &self,
        theta: f64,
        branch: Branch,
    ) -> Result<SphericalAngles, GeometryError> {
        if self.sw < 1e-12 {
            // Pole-centered: the boundary is the parallel theta = arccos(t/c_w).
            let t0 = (self.t / self.cw).clamp(-1.0, 1.0).acos();
            let phi = match branch {
                Branch::Plus => self.phi_w,
                Branch::Minus => self.phi_w + PI,
            };
            return Ok(SphericalAngles::new(phi, t0));
        }
        if self.t < 1e-12 && self.cw < 1e-12 {
            // Through both poles: the meridian pair phi_w + pi/2, phi_w + 3*pi/2.
            let phi = self.phi_w + FRAC_PI_2 + if branch == Branch::Minus { PI } else { 0.0 };
            return Ok(SphericalAngles::new(phi, theta));
        }
        let st = theta.sin();
        if st < 1e-9 {
            // A pole lies on the boundary (c_w = t at theta = 0 in the
            // reduced frame); the parametrization limit is phi_w +- pi/2.
            let phi = self.phi_w + branch.sign() * FRAC_PI_2;
            return Ok(SphericalAngles::new(phi, theta));
        }
        let raw = (self.t - theta.cos() * self.cw) / (st * self.sw);
        if raw.abs() > 1.0 + CLAMP_TOL {
            return Err(GeometryError::ArccosDomain(raw));
        }
        let phi = self.phi_w + branch.sign() * raw.clamp(-1.0, 1.0).acos();
        Ok(SphericalAngles::new(phi, theta))
    }
}

/// Uniform point on the sphere: `z` uniform in `[-1,1]`, `phi` uniform in
/// `[0, 2*pi)`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> UnitVector {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..TAU);
    let s = (1.0 - z * z).max(0.0).sqrt();
    UnitVector {
        x: phi.cos() * s,
        y: phi.sin() * s,
        z,
    }
}

/// Cap with uniform center and height `t` uniform in `[-1, 1]`.
pub fn random_cap<R: Rng + ?Sized>(rng: &mut R) -> Cap {
    let w = random_unit_vector(rng);
    let t: f64 = rng.random_range(-1.0..=1.0);
    Cap::new(w, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn axis_points_to_cartesian() {
        let v = SphericalAngles::new(0.0, FRAC_PI_2).to_unit_vector();
        assert_abs_diff_eq!(v.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.z, 0.0, epsilon = 1e-15);
        let v = SphericalAngles::new(FRAC_PI_2, FRAC_PI_2).to_unit_vector();
        assert_abs_diff_eq!(v.y, 1.0, epsilon = 1e-15);
        // The pole is phi-independent.
        let v = SphericalAngles::new(1.3, 0.0).to_unit_vector();
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.z, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pole_angle_convention() {
        let a = UnitVector::NORTH.to_angles();
        assert_eq!(a.phi, 0.0);
        assert_eq!(a.theta, 0.0);
        let a = UnitVector { x: 0.0, y: -1.0, z: 0.0 }.to_angles();
        assert_abs_diff_eq!(a.phi, 3.0 * FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(a.theta, FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn cap_area_fractions() {
        assert_eq!(Cap::new(UnitVector::NORTH, 1.0).area_fraction(), 0.0);
        assert_eq!(Cap::new(UnitVector::NORTH, -1.0).area_fraction(), 1.0);
        assert_eq!(Cap::new(UnitVector::NORTH, 0.0).area_fraction(), 0.5);
    }

    #[test]
    fn cap_contains_boundary_conventions() {
        let c = Cap::new(UnitVector::NORTH, 0.0);
        let x = UnitVector { x: 1.0, y: 0.0, z: 0.0 };
        assert!(c.contains(UnitVector::NORTH, true));
        assert!(c.contains(x, true));
        assert!(!c.contains(x, false));
    }

    #[test]
    fn theta_range_examples() {
        // Pole-centered hemisphere: boundary is one parallel.
        let (lo, hi) = Cap::new(UnitVector::NORTH, 0.0).boundary_theta_range();
        assert_abs_diff_eq!(lo, FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, FRAC_PI_2, epsilon = 1e-15);
        // Great circle through the poles.
        let eq = UnitVector { x: 1.0, y: 0.0, z: 0.0 };
        let (lo, hi) = Cap::new(eq, 0.0).boundary_theta_range();
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, PI, epsilon = 1e-15);
        // Boundary touching the north pole.
        let w = SphericalAngles::new(0.0, PI / 4.0).to_unit_vector();
        let (lo, hi) = Cap::new(w, (PI / 4.0).cos()).boundary_theta_range();
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn boundary_point_direct_substitution() {
        // Equatorial center, s_w = 1: phi = arccos(t) at theta = pi/2.
        let w = SphericalAngles::new(0.0, FRAC_PI_2).to_unit_vector();
        let c = Cap::new(w, 0.5);
        let p = c.boundary_point(FRAC_PI_2, Branch::Plus).unwrap();
        assert_abs_diff_eq!(p.phi, (0.5f64).acos(), epsilon = 1e-14);
        assert_abs_diff_eq!(p.theta, FRAC_PI_2, epsilon = 1e-14);
    }

    #[test]
    fn boundary_point_pole_on_boundary_limit() {
        // c_w = t: north pole on the boundary, phi -> phi_w + pi/2 as theta -> 0.
        let phi_w = 0.7;
        let theta_w = 0.6;
        let w = SphericalAngles::new(phi_w, theta_w).to_unit_vector();
        let c = Cap::new(w, theta_w.cos());
        let p = c.boundary_point(1e-12, Branch::Plus).unwrap();
        assert_abs_diff_eq!(p.phi, phi_w + FRAC_PI_2, epsilon = 1e-9);
    }

    #[test]
    fn boundary_point_pole_centered() {
        let c = Cap::new(UnitVector::NORTH, 0.5);
        for b in [Branch::Plus, Branch::Minus] {
            let p = c.boundary_point((0.5f64).acos(), b).unwrap();
            assert_abs_diff_eq!(p.theta, (0.5f64).acos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn boundary_theta_out_of_range_is_error() {
        let w = SphericalAngles::new(0.0, FRAC_PI_2).to_unit_vector();
        let c = Cap::new(w, 0.5);
        assert!(matches!(
            c.boundary_point(0.01, Branch::Plus),
            Err(GeometryError::ThetaOutOfRange { .. })
        ));
    }

    #[test]
    fn boundary_consistency_random_caps() {
        // <boundary point, w> = t within 1e-10 for both branches (Eq. 2.2).
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..500 {
            let c = random_cap(&mut rng);
            if c.t.abs() > 0.999 {
                continue;
            }
            let (lo, hi) = c.boundary_theta_range();
            for i in 0..=20 {
                let theta = lo + (hi - lo) * i as f64 / 20.0;
                for b in [Branch::Plus, Branch::Minus] {
                    let p = c.boundary_point(theta, b).unwrap().to_unit_vector();
                    assert_abs_diff_eq!(p.dot(c.w), c.t, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn branches_coincide_at_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let c = random_cap(&mut rng);
            if c.t.abs() > 0.999 || matches!(c.kind(), CapKind::PoleCentered | CapKind::BothPoles) {
                continue;
            }
            let (lo, hi) = c.boundary_theta_range();
            for theta in [lo, hi] {
                if theta.sin() < 1e-9 {
                    continue; // pole endpoint, phi convention differs
                }
                let a = c.boundary_point(theta, Branch::Plus).unwrap();
                let b = c.boundary_point(theta, Branch::Minus).unwrap();
                let va = a.to_unit_vector();
                let vb = b.to_unit_vector();
                let d = ((va.x - vb.x).powi(2) + (va.y - vb.y).powi(2) + (va.z - vb.z).powi(2)).sqrt();
                assert!(d < 1e-6, "branch endpoints disagree by {d}");
            }
        }
    }

    #[test]
    fn rng_is_reproducible() {
        let mut a = ChaCha8Rng::seed_from_u64(123);
        let mut b = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..32 {
            let va = random_unit_vector(&mut a);
            let vb = random_unit_vector(&mut b);
            assert_eq!(va, vb);
        }
    }

    #[test]
    fn uniform_sampling_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000usize;
        let cap = Cap::new(UnitVector::NORTH, 0.5);
        let mut z_sum = 0.0;
        let mut hits = 0usize;
        for _ in 0..n {
            let v = random_unit_vector(&mut rng);
            z_sum += v.z;
            if cap.contains(v, true) {
                hits += 1;
            }
        }
        // z ~ U[-1,1]: sd of mean = 1/sqrt(3n).
        let mean_z = z_sum / n as f64;
        assert!(mean_z.abs() < 4.0 / (3.0 * n as f64).sqrt(), "mean z = {mean_z}");
        // Cap hit fraction ~ Bernoulli(0.25).
        let frac = hits as f64 / n as f64;
        let sd = (0.25 * 0.75 / n as f64).sqrt();
        assert!((frac - 0.25).abs() < 4.0 * sd, "cap fraction = {frac}");
    }

    proptest! {
        #[test]
        fn angle_round_trip(phi in 0.0..TAU, theta in 1e-9..(PI - 1e-9)) {
            let a = SphericalAngles::new(phi, theta);
            let b = a.to_unit_vector().to_angles();
            prop_assert!((a.theta - b.theta).abs() < 1e-12);
            let dphi = (a.phi - b.phi).abs();
            prop_assert!(dphi < 1e-12 || (TAU - dphi) < 1e-12);
        }

        #[test]
        fn vector_round_trip(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_unit_vector(&mut rng);
            let w = v.to_angles().to_unit_vector();
            prop_assert!((v.x - w.x).abs() < 1e-12);
            prop_assert!((v.y - w.y).abs() < 1e-12);
            prop_assert!((v.z - w.z).abs() < 1e-12);
        }

        #[test]
        fn branch_reflection_symmetry(seed in any::<u64>(), frac in 0.0..1.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_cap(&mut rng);
            prop_assume!(c.t.abs() < 0.999);
            prop_assume!(matches!(c.kind(), CapKind::Generic));
            let (lo, hi) = c.boundary_theta_range();
            let theta = lo + (hi - lo) * frac;
            prop_assume!(theta.sin() > 1e-6);
            let r = c.reduced();
            let a = c.boundary_point(theta, Branch::Plus).unwrap();
            let b = c.boundary_point(theta, Branch::Minus).unwrap();
            // Reflections through the meridian phi = phi_w.
            let da = wrap_phi(a.phi - r.phi_w);
            let db = wrap_phi(r.phi_w - b.phi);
            prop_assert!((da - db).abs() < 1e-9 || (da - db).abs() > TAU - 1e-9);
        }
    }
}
