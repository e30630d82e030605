use afc_core::counting::{
    coincidence_histogram, fit_side_decays, g2_cross, heralded_autocorrelation,
    unconditional_autocorrelation,
};
use afc_core::source::{generate_timetags, sample_pair_delay, GenerateOptions};
use afc_core::{BiphotonModel, DetectionChain, NoiseRates, TimeTagStream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn poisson(ch: u8, rate_hz: f64, duration_s: f64, seed: u64) -> TimeTagStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0f64;
    let mut out = Vec::new();
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / rate_hz;
        if t >= duration_s {
            break;
        }
        out.push((t * 1e12) as u64);
    }
    out.dedup();
    TimeTagStream::new(ch, out).unwrap()
}

/// Source detected on two signal arms with ideal efficiencies and no noise.
fn thermal_split(
    modes: u32,
    rate_per_arm: f64,
    herald_hz: f64,
    duration_s: f64,
    seed: u64,
) -> (TimeTagStream, TimeTagStream, TimeTagStream) {
    let model = BiphotonModel {
        mode_count: modes,
        ..BiphotonModel::default()
    };
    let chain = DetectionChain {
        herald_eff: 1.0,
        signal_det_eff: [1.0, 1.0],
        idler_det_eff: [0.0, 0.0],
        signal_dark_hz: [0.0, 0.0],
        idler_dark_hz: [herald_hz, 0.0],
    };
    let per_mode = 2.0 * rate_per_arm / modes as f64;
    let opts = GenerateOptions {
        hbt_signal: true,
        ..Default::default()
    };
    let s = generate_timetags(
        &model,
        &chain,
        per_mode,
        &NoiseRates::default(),
        duration_s,
        &opts,
        seed,
    )
    .unwrap();
    (s.idler, s.signal, s.signal_b.unwrap())
}

/// Zero-delay g² of `n` equal thermal modes with uniformly filled
/// coherence cells of length `tc`, averaged over a window `w`.
fn windowed_thermal(n: f64, tc: f64, w: f64) -> f64 {
    if w <= 2.0 * tc {
        // Mean of the triangle 1 - |t|/tc over |t| < w/2.
        1.0 + (1.0 - w / (4.0 * tc)) / n
    } else {
        1.0 + tc / (n * w)
    }
}

#[test]
fn independent_poisson_histogram_is_flat() {
    let a = poisson(0, 1000.0, 100.0, 1);
    let b = poisson(1, 1000.0, 100.0, 2);
    let h = coincidence_histogram(&a, &b, 100.0, (-5000.0, 5000.0)).unwrap();
    let expected_per_bin = 1000.0 * 1000.0 * 100e-9 * 100.0;
    let mean = h.total() as f64 / h.len() as f64;
    let sigma = (expected_per_bin / h.len() as f64).sqrt();
    assert!((mean - expected_per_bin).abs() < 3.0 * sigma, "{mean}");
}

#[test]
fn side_decays_recover_linewidths() {
    let model = BiphotonModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut idl = Vec::new();
    let mut sig = Vec::new();
    for k in 0..400_000u64 {
        let t = 1_000_000 + k * 50_000_000;
        idl.push(t);
        sig.push((t as f64 + sample_pair_delay(&model, &mut rng) * 1e3) as u64);
    }
    let h = coincidence_histogram(
        &TimeTagStream::new(0, idl).unwrap(),
        &TimeTagStream::new(1, sig).unwrap(),
        2.0,
        (-600.0, 600.0),
    )
    .unwrap();
    let d = fit_side_decays(&h, 0.0, 0.0, 350.0).unwrap();
    let (gs, gi) = d.linewidths_mhz();
    assert!(
        (gs - model.gamma_s_mhz).abs() / model.gamma_s_mhz < 0.05,
        "{gs}"
    );
    assert!(
        (gi - model.gamma_i_mhz).abs() / model.gamma_i_mhz < 0.05,
        "{gi}"
    );
}

#[test]
fn independent_streams_give_unit_g2_across_rates() {
    let rates = [10.0, 100.0, 1_000.0, 10_000.0];
    let mut seed = 10;
    for &r1 in &rates {
        for &r2 in &rates {
            let duration = 2e7 / (r1 * r2);
            let a = poisson(0, r1, duration, seed);
            let b = poisson(1, r2, duration, seed + 1);
            seed += 2;
            let h = coincidence_histogram(&a, &b, 10.0, (-50_000.0, 50_000.0)).unwrap();
            let g = g2_cross(&h, 400.0, Some(0.0), None).unwrap();
            assert!(
                (g.g2 - 1.0).abs() < 3.0 * g.sigma,
                "{r1} x {r2}: {} ± {}",
                g.g2,
                g.sigma
            );
        }
    }
}

#[test]
fn doubling_acquisition_halves_variance() {
    let sigma = |duration: f64| {
        let a = poisson(0, 2000.0, duration, 21);
        let b = poisson(1, 2000.0, duration, 22);
        let h = coincidence_histogram(&a, &b, 10.0, (-20_000.0, 20_000.0)).unwrap();
        g2_cross(&h, 400.0, Some(0.0), None).unwrap().sigma
    };
    let ratio = (sigma(50.0) / sigma(100.0)).powi(2);
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
}

#[test]
fn shifted_windows_agree_on_stationary_background() {
    let a = poisson(0, 3000.0, 50.0, 31);
    let b = poisson(1, 3000.0, 50.0, 32);
    let h = coincidence_histogram(&a, &b, 10.0, (-40_000.0, 40_000.0)).unwrap();
    let base = g2_cross(&h, 400.0, Some(-15_000.0), Some(&[(-12_000.0, -2_000.0)])).unwrap();
    let moved = g2_cross(&h, 400.0, Some(5_000.0), Some(&[(8_000.0, 18_000.0)])).unwrap();
    let s = (base.sigma.powi(2) + moved.sigma.powi(2)).sqrt();
    assert!((base.g2 - moved.g2).abs() < 3.0 * s);
}

#[test]
fn heralded_reference_bins_are_uniform_for_memoryless_source() {
    let h = poisson(0, 20_000.0, 20.0, 41);
    let a = poisson(1, 50_000.0, 20.0, 42);
    let b = poisson(2, 50_000.0, 20.0, 43);
    let r = heralded_autocorrelation(&h, &a, &b, 400.0).unwrap();
    let refs: Vec<f64> = r.bins[1..].iter().map(|c| *c as f64).collect();
    let mean = refs.iter().sum::<f64>() / refs.len() as f64;
    let chi2: f64 = refs.iter().map(|c| (c - mean).powi(2) / mean).sum();
    let p = 1.0 - ChiSquared::new((refs.len() - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "χ² = {chi2}, p = {p}");
    assert!((r.g2 - 1.0).abs() < 3.0 * r.sigma);
}

#[test]
fn unheralded_single_mode_bunching() {
    let (herald, a, b) = thermal_split(1, 1.0e6, 1.0e5, 10.0, 51);
    let tc = BiphotonModel::default().cell_ns();
    let w = 20.0;
    let oracle = windowed_thermal(1.0, tc, w);
    let r = heralded_autocorrelation(&herald, &a, &b, w).unwrap();
    assert!(
        (r.g2 - oracle).abs() < 3.0 * r.sigma,
        "{} ± {} vs {oracle}",
        r.g2,
        r.sigma
    );
    let u = unconditional_autocorrelation(&a, &b, w).unwrap();
    assert!(
        (u.g2 - oracle).abs() < 3.0 * u.sigma,
        "{} ± {} vs {oracle}",
        u.g2,
        u.sigma
    );
}

#[test]
fn coherent_light_has_unit_autocorrelation() {
    let a = poisson(1, 2.0e5, 5.0, 61);
    let b = poisson(2, 2.0e5, 5.0, 62);
    let u = unconditional_autocorrelation(&a, &b, 5.0).unwrap();
    assert!((u.g2 - 1.0).abs() < 3.0 * u.sigma, "{} ± {}", u.g2, u.sigma);
}

#[test]
fn dark_counts_are_poissonian() {
    let chain = DetectionChain {
        idler_dark_hz: [400.0, 0.0],
        ..DetectionChain::source()
    };
    let s = generate_timetags(
        &BiphotonModel::default(),
        &chain,
        0.0,
        &NoiseRates::default(),
        200.0,
        &GenerateOptions::default(),
        71,
    )
    .unwrap();
    let mut counts = vec![0.0f64; 200];
    for t in s.idler.timestamps() {
        counts[(*t / 1_000_000_000_000) as usize] += 1.0;
    }
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    assert!((mean - 400.0).abs() < 3.0 * (400.0f64 / 200.0).sqrt());
    // Index of dispersion: (k - 1)·s²/mean is χ² with k - 1 dof.
    let chi2: f64 = counts.iter().map(|c| (c - mean).powi(2) / mean).sum();
    let dist = ChiSquared::new(199.0).unwrap();
    let p = dist.cdf(chi2);
    assert!(p > 0.005 && p < 0.995, "χ² = {chi2}");
}
