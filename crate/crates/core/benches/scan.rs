//! Sequential reference scan against the block-parallel scan.
//!
//! Build with `--no-default-features` to time the parallel code path on the
//! sequential backend.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rfssm_core::rng::stream;
use rfssm_core::scan::{scan_parallel, scan_sequential};

fn bench_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("scan");
    let mut r = stream(0, &[]);
    for &(len, h) in &[(1024usize, 32usize), (4096, 128), (784, 128)] {
        let a: Vec<Complex64> = (0..h).map(|_| Complex64::from_polar(r.random_range(0.5..1.0), r.random_range(-3.0..3.0))).collect();
        let u = Array2::from_shape_fn((len, h), |_| Complex64::new(r.random(), r.random()));
        let x0 = vec![Complex64::new(0.0, 0.0); h];
        let id = format!("L{len}xH{h}");
        group.throughput(Throughput::Elements((len * h) as u64));
        group.bench_with_input(BenchmarkId::new("sequential", &id), &u, |b, u| {
            b.iter(|| scan_sequential(&a, u.view(), &x0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", &id), &u, |b, u| {
            b.iter(|| scan_parallel(&a, u.view(), &x0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_scan);
criterion_main!(benches);
