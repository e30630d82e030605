use afc_bench::comb_profile;
use afc_core::memory::{propagate_pulse, storage_input};
use afc_core::waveguide::{overlap_efficiency, reproduce_table1};
use afc_core::GaussianMode;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn overlap(c: &mut Criterion) {
    let a = GaussianMode::circular(5.9).unwrap();
    let b = GaussianMode::new(7.2, 12.5).unwrap();
    c.bench_function("overlap_efficiency", |bench| {
        bench.iter(|| overlap_efficiency(black_box(&a), black_box(&b)))
    });
    c.bench_function("reproduce_table1", |bench| {
        bench.iter(|| reproduce_table1().unwrap())
    });
}

fn propagation(c: &mut Criterion) {
    let input = storage_input(5.0, 200.0).unwrap();
    let profile = comb_profile(1.5, 1.0);
    c.bench_function("propagate_pulse 16384 samples", |bench| {
        bench.iter(|| propagate_pulse(black_box(&profile), black_box(&input)).unwrap())
    });
}

criterion_group!(benches, overlap, propagation);
criterion_main!(benches);
