//! Shared fixtures for the benchmarks.

use afc_core::spectral::{carve_comb, AbsorptionProfile, CombSpec, FreqGrid};
use afc_core::TimeTagStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Poisson click train at `rate_hz` over `duration_s`.
pub fn poisson_stream(channel: u8, rate_hz: f64, duration_s: f64, seed: u64) -> TimeTagStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0f64;
    let mut tags = Vec::new();
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / rate_hz;
        if t >= duration_s {
            break;
        }
        tags.push((t * 1e12) as u64);
    }
    tags.dedup();
    TimeTagStream::new(channel, tags).expect("sorted tags")
}

pub fn comb_profile(tau_us: f64, peak_od: f64) -> AbsorptionProfile {
    let flat = AbsorptionProfile::flat(FreqGrid::comb_default(), 0.0).expect("grid");
    carve_comb(
        &flat,
        &CombSpec::for_storage_time(tau_us, peak_od, 0.0, 16.0),
    )
    .expect("comb")
}
