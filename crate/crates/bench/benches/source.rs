use afc_core::source::{generate_timetags, GenerateOptions};
use afc_core::{BiphotonModel, DetectionChain, NoiseRates};
use criterion::{criterion_group, criterion_main, Criterion};

fn generate(c: &mut Criterion) {
    let model = BiphotonModel::default();
    let chain = DetectionChain::waveguide();
    let noise = NoiseRates {
        broadband_hz: 40_000.0,
    };
    let opts = GenerateOptions {
        hbt_signal: true,
        ..Default::default()
    };
    let mut g = c.benchmark_group("generate_timetags");
    g.sample_size(10);
    g.bench_function("10 s at 13 kHz per mode", |bench| {
        bench.iter(|| generate_timetags(&model, &chain, 13_000.0, &noise, 10.0, &opts, 7).unwrap())
    });
    g.finish();
}

criterion_group!(benches, generate);
criterion_main!(benches);
