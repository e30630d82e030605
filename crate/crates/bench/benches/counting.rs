use afc_bench::poisson_stream;
use afc_core::counting::{coincidence_histogram, g2_cross, heralded_autocorrelation};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn histogram(c: &mut Criterion) {
    let a = poisson_stream(0, 20_000.0, 10.0, 1);
    let b = poisson_stream(1, 20_000.0, 10.0, 2);
    c.bench_function("coincidence_histogram 200k x 200k, 1 ns bins", |bench| {
        bench.iter(|| {
            coincidence_histogram(black_box(&a), black_box(&b), 1.0, (-10_000.0, 10_000.0)).unwrap()
        })
    });
    let h = coincidence_histogram(&a, &b, 1.0, (-10_000.0, 10_000.0)).unwrap();
    c.bench_function("g2_cross", |bench| {
        bench.iter(|| g2_cross(black_box(&h), 400.0, Some(0.0), None).unwrap())
    });
}

fn heralded(c: &mut Criterion) {
    let h = poisson_stream(0, 20_000.0, 10.0, 3);
    let a = poisson_stream(1, 50_000.0, 10.0, 4);
    let b = poisson_stream(2, 50_000.0, 10.0, 5);
    c.bench_function("heralded_autocorrelation", |bench| {
        bench.iter(|| heralded_autocorrelation(black_box(&h), &a, &b, 400.0).unwrap())
    });
}

criterion_group!(benches, histogram, heralded);
criterion_main!(benches);
