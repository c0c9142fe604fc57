//! Spherical cap discrepancy: local discrepancy, an exact solver over a
//! pinned-cap candidate family, a randomized estimator, the explicit
//! near-equator lower-bound cap, jittered sampling, and slope experiments.

use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec;
use crate::geometry::{random_cap, Cap, UnitVector};
use crate::projection::unproject;
use crate::tessellation::{
    healpix_points, sample_in_pixel_plane, Level, PixelIndex, TessellationError,
};

/// Largest point-set size handled by the exact solver by default.
pub const EXACT_SIZE_LIMIT: usize = 256;

/// Default number of random caps for the estimator when a caller does not
/// choose one.
pub const ESTIMATE_CAPS_DEFAULT: usize = 100_000;

/// How many of the best sampled centers get a full height scan in the
/// estimator.
const ESTIMATE_RESCAN: usize = 100;

#[derive(Debug, Error)]
pub enum DiscrepancyError {
    #[error("point set of size {size} exceeds the exact-mode limit {limit}")]
    SizeLimit { size: usize, limit: usize },
    #[error("empty point set")]
    EmptySet,
}

/// Whether a cap counts its boundary points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountConvention {
    Closed,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Estimate,
}

/// An ordered point set on the sphere with a provenance label.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub points: Vec<UnitVector>,
    pub label: String,
}

impl PointSet {
    pub fn new(points: Vec<UnitVector>, label: impl Into<String>) -> Self {
        PointSet { points, label: label.into() }
    }

    /// The pixel-center point set `H_N` at the given level.
    pub fn healpix(ell: Level) -> Self {
        let points = healpix_points(ell)
            .into_iter()
            .map(|a| a.to_unit_vector())
            .collect();
        PointSet { points, label: format!("healpix-l{}", ell.ell()) }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Result of a discrepancy computation, with the attaining cap.
#[derive(Debug, Clone)]
pub struct DiscrepancyReport {
    pub value: f64,
    pub witness_cap: Cap,
    /// Counting convention under which the witness attains `value`.
    pub witness_convention: CountConvention,
    pub mode: Mode,
    pub caps_examined: u64,
}

/// `| #(Z ∩ C)/N − σ(C) |` with the requested boundary convention.
pub fn local_discrepancy(z: &PointSet, c: &Cap, closed: bool) -> f64 {
    debug_assert!(!z.is_empty());
    let count = z.points.iter().filter(|&&p| c.contains(p, closed)).count();
    (count as f64 / z.len() as f64 - c.area_fraction()).abs()
}

/// Best `(value, cap, convention)` seen so far; comparisons are exact and
/// ties are broken lexicographically so parallel reductions are
/// deterministic.
#[derive(Debug, Clone, Copy)]
struct Witness {
    value: f64,
    w: UnitVector,
    t: f64,
    conv: CountConvention,
}

fn conv_rank(c: CountConvention) -> u8 {
    match c {
        CountConvention::Closed => 0,
        CountConvention::Open => 1,
    }
}

fn witness_better(a: &Witness, b: &Witness) -> bool {
    if a.value != b.value {
        return a.value > b.value;
    }
    let ka = (a.w.x, a.w.y, a.w.z, a.t, conv_rank(a.conv));
    let kb = (b.w.x, b.w.y, b.w.z, b.t, conv_rank(b.conv));
    ka.partial_cmp(&kb) == Some(std::cmp::Ordering::Less)
}

#[derive(Debug, Clone)]
struct Acc {
    best: Option<Witness>,
    examined: u64,
}

impl Acc {
    fn empty() -> Self {
        Acc { best: None, examined: 0 }
    }

    fn push(&mut self, w: Witness) {
        self.examined += 1;
        if self.best.as_ref().map_or(true, |b| witness_better(&w, b)) {
            self.best = Some(w);
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        self.examined += other.examined;
        if let Some(w) = other.best {
            if self.best.as_ref().map_or(true, |b| witness_better(&w, b)) {
                self.best = Some(w);
            }
        }
        self
    }
}

/// Scans every height threshold `t ∈ {<w,z_i>} ∪ {±1}` for a fixed center,
/// evaluating both boundary conventions in one sorted pass.
fn height_scan(points: &[UnitVector], w: UnitVector, acc: &mut Acc) {
    let n = points.len();
    let nf = n as f64;
    // Clamp: self-dots can exceed 1 by an ulp, and thresholds become cap
    // heights.
    let mut dots: Vec<f64> = points.iter().map(|p| p.dot(w).clamp(-1.0, 1.0)).collect();
    dots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut consider = |t: f64, count: usize, conv: CountConvention| {
        let value = (count as f64 / nf - (1.0 - t) / 2.0).abs();
        acc.push(Witness { value, w, t, conv });
    };
    let mut i = 0;
    while i < n {
        let t = dots[i];
        let mut j = i;
        while j < n && dots[j] == t {
            j += 1;
        }
        // `j` points satisfy `<w,z> >= t`, `i` satisfy the strict inequality.
        consider(t, j, CountConvention::Closed);
        consider(t, i, CountConvention::Open);
        i = j;
    }
    let at_top = dots.iter().take_while(|&&d| d >= 1.0).count();
    consider(1.0, at_top, CountConvention::Closed);
    consider(1.0, 0, CountConvention::Open);
    consider(-1.0, n, CountConvention::Closed);
    consider(-1.0, dots.iter().take_while(|&&d| d > -1.0).count(), CountConvention::Open);
}

fn report_from(acc: Acc, mode: Mode) -> DiscrepancyReport {
    let w = acc.best.expect("at least one cap is always examined");
    DiscrepancyReport {
        value: w.value,
        witness_cap: Cap::new(w.w, w.t),
        witness_convention: w.conv,
        mode,
        caps_examined: acc.examined,
    }
}

/// Exact supremum of the local discrepancy with the default size limit.
pub fn exact_discrepancy(z: &PointSet) -> Result<DiscrepancyReport, DiscrepancyError> {
    exact_discrepancy_with_limit(z, EXACT_SIZE_LIMIT)
}

/// Exact solver: an extremal cap can be shrunk or grown until its boundary
/// is pinned by at most three points, so the supremum is attained on the
/// candidate-center family `{±z_i} ∪ {±(z_i+z_j)^} ∪ {±((z_i−z_j)×(z_i−z_k))^}`
/// with heights at the dot products (both conventions).
pub fn exact_discrepancy_with_limit(
    z: &PointSet,
    limit: usize,
) -> Result<DiscrepancyReport, DiscrepancyError> {
    let n = z.len();
    if n == 0 {
        return Err(DiscrepancyError::EmptySet);
    }
    if n > limit {
        return Err(DiscrepancyError::SizeLimit { size: n, limit });
    }
    let pts = &z.points;
    let npairs = n * (n - 1) / 2;
    // Task m < n: the two single-point centers ±z_m. Task n + r: pair rank
    // r gives (i,j) and covers ±(z_i+z_j)^ plus all triples (i,j,k), k > j.
    let tasks = n + npairs;
    let acc = exec::fold_indexed(
        tasks,
        Acc::empty(),
        |m| {
            let mut acc = Acc::empty();
            let scan_both = |v: (f64, f64, f64), acc: &mut Acc| {
                if let Some(w) = UnitVector::normalized(v.0, v.1, v.2) {
                    height_scan(pts, w, acc);
                    height_scan(pts, w.neg(), acc);
                }
            };
            if m < n {
                let p = pts[m];
                scan_both((p.x, p.y, p.z), &mut acc);
            } else {
                let (i, j) = unrank_pair(m - n, n);
                let (a, b) = (pts[i], pts[j]);
                scan_both((a.x + b.x, a.y + b.y, a.z + b.z), &mut acc);
                let d = (a.x - b.x, a.y - b.y, a.z - b.z);
                for k in j + 1..n {
                    let c = pts[k];
                    let e = (a.x - c.x, a.y - c.y, a.z - c.z);
                    let cross = (
                        d.1 * e.2 - d.2 * e.1,
                        d.2 * e.0 - d.0 * e.2,
                        d.0 * e.1 - d.1 * e.0,
                    );
                    scan_both(cross, &mut acc);
                }
            }
            acc
        },
        Acc::merge,
    );
    Ok(report_from(acc, Mode::Exact))
}

/// Rank `r` in the lexicographic enumeration of pairs `i < j` over `0..n`.
fn unrank_pair(mut r: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if r < row {
            return (i, i + 1 + r);
        }
        r -= row;
        i += 1;
    }
}

/// Randomized lower bound on the discrepancy: `m` uniform caps, then a full
/// height scan at the best sampled centers and at the north pole.
/// Deterministic for a fixed seed independently of the thread count
/// (counter-based RNG streams).
pub fn estimated_discrepancy(z: &PointSet, m: usize, seed: u64) -> DiscrepancyReport {
    debug_assert!(m >= 1 && !z.is_empty());
    let n = z.len();
    let nf = n as f64;
    let sampled: Vec<(f64, Cap, CountConvention)> = exec::map_indexed(m, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let c = random_cap(&mut rng);
        let closed = z.points.iter().filter(|&&p| c.contains(p, true)).count() as f64 / nf;
        let open = z.points.iter().filter(|&&p| c.contains(p, false)).count() as f64 / nf;
        let sigma = c.area_fraction();
        let (vc, vo) = ((closed - sigma).abs(), (open - sigma).abs());
        if vc >= vo {
            (vc, c, CountConvention::Closed)
        } else {
            (vo, c, CountConvention::Open)
        }
    });
    let mut acc = Acc::empty();
    for &(value, c, conv) in &sampled {
        acc.push(Witness { value, w: c.w, t: c.t, conv });
    }
    // Re-scan the most promising centers (deterministic selection) plus the
    // north pole, so the explicit near-equator cap family is always covered.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        sampled[b]
            .0
            .partial_cmp(&sampled[a].0)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut centers: Vec<UnitVector> = order
        .into_iter()
        .take(ESTIMATE_RESCAN)
        .map(|i| sampled[i].1.w)
        .collect();
    centers.push(UnitVector::NORTH);
    let scans = exec::map_indexed(centers.len(), |i| {
        let mut a = Acc::empty();
        height_scan(&z.points, centers[i], &mut a);
        a
    });
    for s in scans {
        acc = acc.merge(s);
    }
    report_from(acc, Mode::Estimate)
}

/// Exact solver when the set is small enough, estimator otherwise.
pub fn discrepancy_auto(z: &PointSet, m_estimate: usize, seed: u64) -> DiscrepancyReport {
    if z.len() <= EXACT_SIZE_LIMIT {
        exact_discrepancy(z).expect("size is within the exact limit")
    } else {
        estimated_discrepancy(z, m_estimate, seed)
    }
}

/// Local discrepancy of `H_N` at the explicit near-equator cap
/// `C(p_n, −1/N)`: the cap covers slightly more than the closed lower
/// hemisphere, so every equator point is inside and the count exceeds the
/// measure by `(E − 1)/(2N)` with `E = sqrt(4N/3)` equator points.
pub fn equator_cap_discrepancy(ell: Level) -> f64 {
    let z = PointSet::healpix(ell);
    let n = z.len() as f64;
    let c = Cap::new(UnitVector::NORTH, -1.0 / n);
    local_discrepancy(&z, &c, true)
}

/// One uniform point per pixel, drawn in the projected square and mapped
/// back; deterministic per `(seed, pixel)`.
pub fn jittered_points(ell: Level, seed: u64) -> PointSet {
    let n = ell.num_pixels() as usize;
    let points = exec::map_indexed(n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let idx = PixelIndex::from_ordinal(ell, i as u64);
        let q = sample_in_pixel_plane(idx, &mut rng);
        unproject(q)
            .expect("pixel interiors avoid the poles")
            .to_unit_vector()
    });
    PointSet { points, label: format!("jitter-l{}-s{}", ell.ell(), seed) }
}

fn split_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over a simple combination.
    let mut x = seed
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(b.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Least-squares slope of `log(mean D(J_N))` against `log N` over the level
/// range, averaging `trials` jittered sets per level. Discrepancies are
/// exact for `N ≤ 256` and estimated with [`ESTIMATE_CAPS_DEFAULT`] caps
/// otherwise.
pub fn jitter_slope_experiment(
    ell_range: RangeInclusive<u32>,
    trials: usize,
    seed: u64,
) -> Result<f64, TessellationError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for ell_u in ell_range {
        let ell = Level::new(ell_u)?;
        let mut acc = 0.0;
        for trial in 0..trials {
            let s = split_seed(seed, ell_u as u64, trial as u64);
            let pts = jittered_points(ell, s);
            let rep = discrepancy_auto(&pts, ESTIMATE_CAPS_DEFAULT, split_seed(s, 1, 0));
            acc += rep.value.ln();
        }
        xs.push((ell.num_pixels() as f64).ln());
        ys.push(acc / trials as f64);
    }
    Ok(lsq_slope(&xs, &ys))
}

/// The same pipeline on the deterministic point sets `H_N`.
pub fn healpix_slope_experiment(
    ell_range: RangeInclusive<u32>,
    m_estimate: usize,
    seed: u64,
) -> Result<f64, TessellationError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for ell_u in ell_range {
        let ell = Level::new(ell_u)?;
        let z = PointSet::healpix(ell);
        let rep = discrepancy_auto(&z, m_estimate, split_seed(seed, ell_u as u64, 0));
        xs.push((z.len() as f64).ln());
        ys.push(rep.value.ln());
    }
    Ok(lsq_slope(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tessellation::point_to_pixel;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn local_discrepancy_reference_values() {
        let z = PointSet::healpix(Level::new(0).unwrap());
        // 4 centers at z = 2/3, 4 at the equator, 4 at z = -2/3: the closed
        // upper hemisphere holds 8 of 12 points.
        let eq = Cap::new(UnitVector::NORTH, 0.0);
        assert!((local_discrepancy(&z, &eq, true) - 1.0 / 6.0).abs() < 1e-15);
        let whole = Cap::new(UnitVector::NORTH, -1.0);
        assert_eq!(local_discrepancy(&z, &whole, true), 0.0);
        let empty = Cap::new(UnitVector::NORTH, 1.0);
        assert_eq!(local_discrepancy(&z, &empty, false), 0.0);
    }

    #[test]
    fn antipodal_pair_has_discrepancy_one_half() {
        let p = UnitVector::normalized(0.3, -0.4, 0.86).unwrap();
        let z = PointSet::new(vec![p, p.neg()], "pair");
        let rep = exact_discrepancy(&z).unwrap();
        assert!((rep.value - 0.5).abs() < 1e-15);
        let closed = rep.witness_convention == CountConvention::Closed;
        assert!((local_discrepancy(&z, &rep.witness_cap, closed) - rep.value).abs() < 1e-12);
    }

    #[test]
    fn exact_report_is_consistent_on_h12() {
        let z = PointSet::healpix(Level::new(0).unwrap());
        let rep = exact_discrepancy(&z).unwrap();
        assert!(rep.value > 0.0 && rep.value < 1.0);
        assert_eq!(rep.mode, Mode::Exact);
        let closed = rep.witness_convention == CountConvention::Closed;
        assert!((local_discrepancy(&z, &rep.witness_cap, closed) - rep.value).abs() < 1e-12);
        // At least the explicit near-equator cap is dominated.
        assert!(rep.value >= equator_cap_discrepancy(Level::new(0).unwrap()) - 1e-15);
        // Scale band for Theta(N^{-1/2}).
        let scaled = rep.value * (z.len() as f64).sqrt();
        assert!((0.3..7.5).contains(&scaled), "D*sqrt(N) = {scaled}");
    }

    #[test]
    fn exact_dominates_the_estimator() {
        let z = PointSet::healpix(Level::new(0).unwrap());
        let exact = exact_discrepancy(&z).unwrap();
        let est = estimated_discrepancy(&z, 2000, 42);
        assert!(est.value <= exact.value + 1e-15);
        let closed = est.witness_convention == CountConvention::Closed;
        assert!((local_discrepancy(&z, &est.witness_cap, closed) - est.value).abs() < 1e-12);
    }

    #[test]
    fn size_limit_is_enforced() {
        let z = PointSet::healpix(Level::new(3).unwrap());
        assert!(matches!(
            exact_discrepancy(&z),
            Err(DiscrepancyError::SizeLimit { size: 768, limit: 256 })
        ));
    }

    #[test]
    fn estimator_is_deterministic_and_covers_the_equator_cap() {
        let z = PointSet::healpix(Level::new(1).unwrap());
        let a = estimated_discrepancy(&z, 500, 7);
        let b = estimated_discrepancy(&z, 500, 7);
        assert_eq!(a.value, b.value);
        assert_eq!(a.witness_cap.t, b.witness_cap.t);
        assert_eq!(a.caps_examined, b.caps_examined);
        // The north-pole height scan covers C(p_n, -1/N).
        assert!(a.value >= equator_cap_discrepancy(Level::new(1).unwrap()) - 1e-15);
    }

    #[test]
    fn equator_cap_discrepancy_matches_the_closed_form() {
        assert!((equator_cap_discrepancy(Level::new(0).unwrap()) - 0.125).abs() < 1e-15);
        for ell_u in 0..=3u32 {
            let ell = Level::new(ell_u).unwrap();
            let n = ell.num_pixels() as f64;
            let e = (4.0 * n / 3.0).sqrt();
            let expected = (e - 1.0) / (2.0 * n);
            let got = equator_cap_discrepancy(ell);
            assert!((got - expected).abs() < 1e-12, "level {ell_u}: {got} vs {expected}");
            assert!(got > 0.0);
        }
    }

    #[test]
    fn jittered_points_stay_in_their_pixels() {
        let ell = Level::new(2).unwrap();
        let j = jittered_points(ell, 99);
        assert_eq!(j.len(), 192);
        for (i, p) in j.points.iter().enumerate() {
            let idx = point_to_pixel(p.to_angles(), ell);
            assert_eq!(idx.ordinal(), i as u64);
        }
        let again = jittered_points(ell, 99);
        assert_eq!(j.points[17].x, again.points[17].x);
        let other = jittered_points(ell, 100);
        assert!(j.points[17].x != other.points[17].x);
    }

    #[test]
    fn jitter_is_uniform_within_a_pixel() {
        // 10^4 draws in one level-1 pixel, classified into its 4 level-2
        // children: chi-squared with 3 degrees of freedom at significance
        // 1e-3.
        let ell = Level::new(1).unwrap();
        let fine = Level::new(2).unwrap();
        let target = PixelIndex::new(0, 2, ell, 1, 2).unwrap();
        let mut counts = std::collections::HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..10_000 {
            let q = sample_in_pixel_plane(target, &mut rng);
            let p = unproject(q).unwrap();
            let child = point_to_pixel(p, fine);
            *counts.entry(child.ordinal()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4, "draws escaped the pixel: {counts:?}");
        let expected = 10_000.0 / 4.0;
        let stat: f64 = counts
            .values()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        let crit = ChiSquared::new(3.0).unwrap().inverse_cdf(1.0 - 1e-3);
        assert!(stat < crit, "chi2 = {stat} >= {crit}");
    }

    #[test]
    fn slope_experiment_smoke() {
        let slope = jitter_slope_experiment(1..=2, 2, 11).unwrap();
        assert!(slope.is_finite() && slope < -0.3, "slope = {slope}");
        let h = healpix_slope_experiment(0..=2, 2000, 3).unwrap();
        assert!(h.is_finite() && h < -0.2, "healpix slope = {h}");
    }
}
