//! Benchmarks the batch routines that dispatch through the execution layer.
//!
//! The same benchmark names are emitted for both execution modes, so criterion
//! baselines compare them directly:
//!
//! ```text
//! cargo bench -p healpix-cap -- --save-baseline parallel
//! cargo bench -p healpix-cap --no-default-features -- --baseline parallel
//! ```

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use healpix_cap::discrepancy::{estimated_discrepancy, jittered_points, PointSet};
use healpix_cap::tessellation::{healpix_points, Level};

fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "serial"
    }
}

fn bench_points(c: &mut Criterion) {
    let level = Level::new(6).unwrap();
    c.bench_function(&format!("healpix_points/l6/{}", mode()), |b| {
        b.iter(|| black_box(healpix_points(black_box(level))))
    });
}

fn bench_jitter(c: &mut Criterion) {
    let level = Level::new(6).unwrap();
    c.bench_function(&format!("jittered_points/l6/{}", mode()), |b| {
        b.iter(|| black_box(jittered_points(black_box(level), 1)))
    });
}

fn bench_estimate(c: &mut Criterion) {
    let z = PointSet::healpix(Level::new(3).unwrap());
    c.bench_function(&format!("estimated_discrepancy/l3-20k/{}", mode()), |b| {
        b.iter(|| black_box(estimated_discrepancy(black_box(&z), 20_000, 1)))
    });
}

fn bench_exact(c: &mut Criterion) {
    let z = PointSet::healpix(Level::new(1).unwrap());
    c.bench_function(&format!("exact_discrepancy/l1/{}", mode()), |b| {
        b.iter(|| {
            black_box(healpix_cap::discrepancy::exact_discrepancy(black_box(&z)).unwrap())
        })
    });
}

criterion_group!(benches, bench_points, bench_jitter, bench_estimate, bench_exact);
criterion_main!(benches);
