//! Command-line surface for the HEALPix cap-discrepancy library: point
//! generation (CSV/JSON), discrepancy runs, random-cap property surveys, and
//! single-cap diagnostics.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use healpix_cap::curve::{
    cap_pixel_intersection_count, convex_decomposition, curvature_zero_count, curve_length,
    projected_cap_boundary,
};
use healpix_cap::discrepancy::{
    estimated_discrepancy, exact_discrepancy, jittered_points, local_discrepancy, CountConvention,
    DiscrepancyError, DiscrepancyReport, Mode, PointSet,
};
use healpix_cap::geometry::{random_cap, Cap, SphericalAngles};
use healpix_cap::tessellation::{pixel_center, Level, PixelIndex};

/// Highest level the CLI accepts; deeper levels produce unwieldy outputs.
const MAX_CLI_LEVEL: u32 = 12;

#[derive(Parser)]
#[command(name = "healpix-cap", version, about = "HEALPix points and spherical cap discrepancy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the pixel-center point set H_N (or a jittered set) to a file.
    Points {
        #[arg(long)]
        level: u32,
        /// Draw one uniform point per pixel instead of the centers.
        #[arg(long)]
        jitter: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the spherical cap discrepancy and print a JSON report.
    Discrepancy {
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Random caps for sample mode.
        #[arg(long, default_value_t = 100_000)]
        caps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use a jittered point set instead of the centers.
        #[arg(long)]
        jitter: bool,
    },
    /// Survey projected-boundary properties over random caps.
    Survey {
        #[arg(long)]
        level: u32,
        #[arg(long)]
        caps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diagnostics for a single cap C(w(phi,theta), height).
    Cap {
        #[arg(long)]
        level: u32,
        #[arg(long)]
        phi: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        height: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Sample,
}

enum CliError {
    Args(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Args(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Args(m) | CliError::Io(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Points { level, jitter, seed, format, out } => {
            let level = parse_level(level)?;
            let text = points_document(level, jitter, seed, format);
            fs::write(&out, text)
                .map_err(|e| CliError::Io(format!("writing {}: {e}", out.display())))
        }
        Command::Discrepancy { level, mode, caps, seed, jitter } => {
            let level = parse_level(level)?;
            if caps == 0 {
                return Err(CliError::Args("--caps must be at least 1".into()));
            }
            let start = Instant::now();
            let z = if jitter { jittered_points(level, seed) } else { PointSet::healpix(level) };
            let report = match mode {
                ModeArg::Exact => exact_discrepancy(&z).map_err(|e| match e {
                    DiscrepancyError::SizeLimit { .. } | DiscrepancyError::EmptySet => {
                        CliError::Args(e.to_string())
                    }
                })?,
                ModeArg::Sample => estimated_discrepancy(&z, caps, seed),
            };
            println!(
                "{}",
                report_json(&report, start.elapsed().as_millis() as u64)
            );
            Ok(())
        }
        Command::Survey { level, caps, seed, out } => {
            let level = parse_level(level)?;
            if caps == 0 {
                return Err(CliError::Args("--caps must be at least 1".into()));
            }
            let doc = survey_document(level, caps, seed);
            fs::write(&out, doc)
                .map_err(|e| CliError::Io(format!("writing {}: {e}", out.display())))
        }
        Command::Cap { level, phi, theta, height } => {
            let level = parse_level(level)?;
            if !(-1.0..=1.0).contains(&height) {
                return Err(CliError::Args("--height must lie in [-1, 1]".into()));
            }
            if !(0.0..=std::f64::consts::PI).contains(&theta) {
                return Err(CliError::Args("--theta must lie in [0, pi]".into()));
            }
            println!("{}", cap_document(level, phi, theta, height));
            Ok(())
        }
    }
}

fn parse_level(level: u32) -> Result<Level, CliError> {
    if level > MAX_CLI_LEVEL {
        return Err(CliError::Args(format!("--level must be at most {MAX_CLI_LEVEL}")));
    }
    Level::new(level).map_err(|e| CliError::Args(e.to_string()))
}

/// 17 significant digits: enough to reproduce any f64 bit-exactly.
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

struct PointRow {
    s: i8,
    k: u8,
    level: u32,
    r: u32,
    c: u32,
    phi: f64,
    theta: f64,
    x: f64,
    y: f64,
    z: f64,
}

fn point_rows(level: Level, jitter: bool, seed: u64) -> Vec<PointRow> {
    let angles: Vec<SphericalAngles> = if jitter {
        jittered_points(level, seed)
            .points
            .iter()
            .map(|p| p.to_angles())
            .collect()
    } else {
        (0..level.num_pixels())
            .map(|i| pixel_center(PixelIndex::from_ordinal(level, i)))
            .collect()
    };
    angles
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let idx = PixelIndex::from_ordinal(level, i as u64);
            let v = a.to_unit_vector();
            PointRow {
                s: idx.s(),
                k: idx.k(),
                level: level.ell(),
                r: idx.r(),
                c: idx.c(),
                phi: a.phi,
                theta: a.theta,
                x: v.x,
                y: v.y,
                z: v.z,
            }
        })
        .collect()
}

fn points_document(level: Level, jitter: bool, seed: u64, format: Format) -> String {
    let rows = point_rows(level, jitter, seed);
    match format {
        Format::Csv => {
            let mut out = String::from("s,k,level,r,c,phi,theta,x,y,z\n");
            for row in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    row.s,
                    row.k,
                    row.level,
                    row.r,
                    row.c,
                    fmt17(row.phi),
                    fmt17(row.theta),
                    fmt17(row.x),
                    fmt17(row.y),
                    fmt17(row.z)
                );
            }
            out
        }
        Format::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    json!({
                        "s": row.s,
                        "k": row.k,
                        "level": row.level,
                        "r": row.r,
                        "c": row.c,
                        "phi": row.phi,
                        "theta": row.theta,
                        "x": row.x,
                        "y": row.y,
                        "z": row.z,
                    })
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&items).expect("plain data serializes");
            text.push('\n');
            text
        }
    }
}

fn report_json(report: &DiscrepancyReport, runtime_ms: u64) -> String {
    let convention = match report.witness_convention {
        CountConvention::Closed => "closed",
        CountConvention::Open => "open",
    };
    let mode = match report.mode {
        Mode::Exact => "exact",
        Mode::Estimate => "sample",
    };
    json!({
        "value": report.value,
        "witness": {
            "w": [report.witness_cap.w.x, report.witness_cap.w.y, report.witness_cap.w.z],
            "t": report.witness_cap.t,
            "convention": convention,
        },
        "mode": mode,
        "caps_examined": report.caps_examined,
        "runtime_ms": runtime_ms,
    })
    .to_string()
}

struct CapStats {
    length: f64,
    intersections: usize,
    zeros_total: usize,
    n: usize,
    failed: bool,
}

fn cap_stats(c: &Cap, level: Level) -> CapStats {
    let mut failed = false;
    let (length, n) = match projected_cap_boundary(c) {
        Ok(b) => {
            let n = match convex_decomposition(&b) {
                Ok(d) => d.n,
                Err(_) => {
                    failed = true;
                    0
                }
            };
            (curve_length(&b), n)
        }
        Err(_) => {
            failed = true;
            (0.0, 0)
        }
    };
    let intersections = match cap_pixel_intersection_count(c, level) {
        Ok(v) => v,
        Err(_) => {
            failed = true;
            0
        }
    };
    // The symmetric families (pole-centered, both-poles) have identically
    // zero curvature; report zero sign changes for them.
    let zeros_total = curvature_zero_count(c).map(|z| z.total()).unwrap_or(0);
    CapStats { length, intersections, zeros_total, n, failed }
}

fn survey_document(level: Level, caps: usize, seed: u64) -> String {
    let stats: Vec<CapStats> = (0..caps)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let c = random_cap(&mut rng);
            cap_stats(&c, level)
        })
        .collect();
    let n_points = level.num_pixels() as f64;
    let length_bound = 5.0 + 2.0f64.sqrt();
    let isect_bound = 2.0 * length_bound / 3.0f64.sqrt() * n_points.sqrt() + 1000.0;
    let conjectured = 1usize << (3 + level.ell());

    let max_length = stats.iter().map(|s| s.length).fold(0.0, f64::max);
    let max_isect = stats.iter().map(|s| s.intersections).max().unwrap_or(0);
    let max_zeros = stats.iter().map(|s| s.zeros_total).max().unwrap_or(0);
    let max_n = stats.iter().map(|s| s.n).max().unwrap_or(0);
    let failures = stats.iter().filter(|s| s.failed).count();

    let mut length_hist = [0u64; 26];
    for s in &stats {
        let bin = ((s.length / 0.25) as usize).min(25);
        length_hist[bin] += 1;
    }
    let mut n_hist = std::collections::BTreeMap::new();
    for s in &stats {
        *n_hist.entry(s.n.to_string()).or_insert(0u64) += 1;
    }
    let mut zeros_hist = std::collections::BTreeMap::new();
    for s in &stats {
        *zeros_hist.entry(s.zeros_total.to_string()).or_insert(0u64) += 1;
    }

    let doc = json!({
        "level": level.ell(),
        "caps": caps,
        "seed": seed,
        "failures": failures,
        "max": {
            "length": max_length,
            "pixel_intersections": max_isect,
            "curvature_zeros_total": max_zeros,
            "convexity_n": max_n,
        },
        "bounds": {
            "length": { "limit": length_bound, "pass": max_length <= length_bound + 1e-6 },
            "pixel_intersections": {
                "limit": isect_bound,
                "pass": (max_isect as f64) <= isect_bound,
                "conjectured_extremal": conjectured,
            },
            "convexity_n": { "limit": 36, "pass": max_n <= 36 },
            "curvature_zeros_total": { "limit": 36, "pass": max_zeros <= 36 },
        },
        "histograms": {
            "length_bin_width": 0.25,
            "length": length_hist.to_vec(),
            "convexity_n": n_hist,
            "curvature_zeros_total": zeros_hist,
        },
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    text.push('\n');
    text
}

fn cap_document(level: Level, phi: f64, theta: f64, height: f64) -> String {
    let w = SphericalAngles::new(phi, theta).to_unit_vector();
    let c = Cap::new(w, height);
    let stats = cap_stats(&c, level);
    let zeros = curvature_zero_count(&c).ok();
    let z = PointSet::healpix(level);
    json!({
        "cap": { "w": [w.x, w.y, w.z], "t": height },
        "level": level.ell(),
        "length": stats.length,
        "pixel_intersections": stats.intersections,
        "curvature_zeros": {
            "equatorial": zeros.map(|z| z.equatorial),
            "north_polar": zeros.map(|z| z.north_polar),
            "south_polar": zeros.map(|z| z.south_polar),
            "total": stats.zeros_total,
        },
        "convexity_n": stats.n,
        "local_discrepancy": {
            "closed": local_discrepancy(&z, &c, true),
            "open": local_discrepancy(&z, &c, false),
        },
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatted_doubles_round_trip() {
        for &v in &[0.1, -1.0 / 3.0, std::f64::consts::PI, 1e-300, 2.0 / 3.0] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn points_document_is_deterministic_and_has_reference_row() {
        let level = Level::new(1).unwrap();
        let a = points_document(level, true, 7, Format::Csv);
        let b = points_document(level, true, 7, Format::Csv);
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 49);

        let centers = points_document(level, false, 0, Format::Csv);
        let row = centers
            .lines()
            .find(|l| l.starts_with("1,0,1,2,2,"))
            .expect("row for pixel (1,0,1,2,2)");
        let fields: Vec<&str> = row.split(',').collect();
        let phi: f64 = fields[5].parse().unwrap();
        let z: f64 = fields[9].parse().unwrap();
        assert!((phi - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((z - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_reproduces_the_point_set() {
        let level = Level::new(2).unwrap();
        let doc = points_document(level, false, 0, Format::Csv);
        let rows = point_rows(level, false, 0);
        for (line, row) in doc.lines().skip(1).zip(&rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[7].parse::<f64>().unwrap(), row.x);
            assert_eq!(fields[8].parse::<f64>().unwrap(), row.y);
            assert_eq!(fields[9].parse::<f64>().unwrap(), row.z);
        }
    }

    #[test]
    fn survey_document_reports_passing_bounds() {
        let doc = survey_document(Level::new(1).unwrap(), 50, 3);
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["caps"], 50);
        assert_eq!(v["failures"], 0);
        assert_eq!(v["bounds"]["length"]["pass"], true);
        assert_eq!(v["bounds"]["convexity_n"]["pass"], true);
        assert_eq!(v["bounds"]["pixel_intersections"]["pass"], true);
    }

    #[test]
    fn cap_document_matches_the_library() {
        let doc = cap_document(Level::new(0).unwrap(), 0.0, 0.0, 0.0);
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        assert!((v["length"].as_f64().unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(v["pixel_intersections"], 12);
        assert!((v["local_discrepancy"]["closed"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }
}
