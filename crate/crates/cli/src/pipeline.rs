//! Photon-counting experiments assembled from the core generators and
//! estimators.

use afc_core::counting::{
    coincidence_histogram, cs_parameter, g2_cross, heralded_autocorrelation,
    HeraldedAutocorrelation,
};
use afc_core::memory::{internal_efficiency, EchoWindows};
use afc_core::source::{
    apply_memory_response, apply_spectral_filter, generate_timetags, GatingConfig, GenerateOptions,
    MemoryResponse, SpectralFilter,
};
use afc_core::{
    BiphotonModel, CSResult, CoincidenceHistogram, CorrelationResult, DetectionChain, DutyCycle,
    Measured, NoiseRates, Origin, Result, TimeTagStream,
};
use serde::Serialize;

/// Half range of the start-stop histograms, ns.
pub const HISTOGRAM_HALF_RANGE_NS: f64 = 10_000.0;
pub const HISTOGRAM_BIN_NS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonSetup {
    pub model: BiphotonModel,
    pub source_chain: DetectionChain,
    pub waveguide_chain: DetectionChain,
    pub pair_hz_per_mw: f64,
    pub broadband_hz_per_mw: f64,
    pub window_ns: f64,
    pub pit_transmission: f64,
}

impl PhotonSetup {
    fn rates(&self, power_mw: f64) -> (f64, NoiseRates) {
        (
            self.pair_hz_per_mw * power_mw,
            NoiseRates {
                broadband_hz: self.broadband_hz_per_mw * power_mw,
            },
        )
    }
}

/// Merges streams into one channel, keeping origins.
pub fn merge(channel: u8, streams: &[&TimeTagStream]) -> TimeTagStream {
    let events = streams.iter().flat_map(|s| s.iter()).collect();
    TimeTagStream::from_unsorted(channel, events)
}

pub fn histogram(idler: &TimeTagStream, signal: &TimeTagStream) -> Result<CoincidenceHistogram> {
    coincidence_histogram(
        idler,
        signal,
        HISTOGRAM_BIN_NS,
        (-HISTOGRAM_HALF_RANGE_NS, HISTOGRAM_HALF_RANGE_NS),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitPoint {
    pub power_mw: f64,
    pub source: CorrelationResult,
    pub pit: CorrelationResult,
    pub heralds: usize,
}

/// Cross-correlation straight after the source and after the pit.
pub fn pit_correlations(
    setup: &PhotonSetup,
    power_mw: f64,
    duration_s: f64,
    seed: u64,
) -> Result<PitPoint> {
    let (pair, noise) = setup.rates(power_mw);
    let opts = GenerateOptions::default();
    let src = generate_timetags(
        &setup.model,
        &setup.source_chain,
        pair,
        &noise,
        duration_s,
        &opts,
        seed,
    )?;
    let source = g2_cross(
        &histogram(&src.idler, &src.signal)?,
        setup.window_ns,
        Some(0.0),
        None,
    )?;
    let wg = generate_timetags(
        &setup.model,
        &setup.waveguide_chain,
        pair,
        &noise,
        duration_s,
        &opts,
        seed ^ 0x5a5a_5a5a,
    )?;
    let filtered = apply_spectral_filter(
        &wg.signal,
        &SpectralFilter::pit(setup.pit_transmission),
        seed,
    )?;
    let pit = g2_cross(
        &histogram(&wg.idler, &filtered)?,
        setup.window_ns,
        Some(0.0),
        None,
    )?;
    Ok(PitPoint {
        power_mw,
        source,
        pit,
        heralds: src.idler.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeraldedRun {
    pub power_mw: f64,
    pub heralded: HeraldedAutocorrelation,
    pub g_si: CorrelationResult,
}

/// Signal split on two detectors after the pit, heralded by the idler.
pub fn heralded_after_pit(
    setup: &PhotonSetup,
    power_mw: f64,
    duration_s: f64,
    seed: u64,
) -> Result<HeraldedRun> {
    let (pair, noise) = setup.rates(power_mw);
    let opts = GenerateOptions {
        hbt_signal: true,
        ..Default::default()
    };
    let s = generate_timetags(
        &setup.model,
        &setup.waveguide_chain,
        pair,
        &noise,
        duration_s,
        &opts,
        seed,
    )?;
    let pit = SpectralFilter::pit(setup.pit_transmission);
    let a = apply_spectral_filter(&s.signal, &pit, seed.wrapping_add(1))?;
    let b = apply_spectral_filter(
        s.signal_b.as_ref().expect("split signal"),
        &pit,
        seed.wrapping_add(2),
    )?;
    let heralded = heralded_autocorrelation(&s.idler, &a, &b, setup.window_ns)?;
    let both = merge(a.channel(), &[&a, &b]);
    let g_si = g2_cross(
        &histogram(&s.idler, &both)?,
        setup.window_ns,
        Some(0.0),
        None,
    )?;
    Ok(HeraldedRun {
        power_mw,
        heralded,
        g_si,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageParams {
    pub power_mw: f64,
    pub tau_us: f64,
    pub eta_afc: f64,
    pub duty: DutyCycle,
    pub duration_s: f64,
    pub g_ii: Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoragePoint {
    pub tau_us: f64,
    pub eta_set: f64,
    /// Efficiency measured from the echo and pit windows.
    pub eta_measured: f64,
    pub eta_sigma: f64,
    pub t_p_off_us: f64,
    pub g_afc: CorrelationResult,
    pub cs: CSResult,
    pub heralds: usize,
    pub live_s: f64,
}

impl StoragePoint {
    /// Distance of `g²_AFC` above `√(g_ss·g_ii)` in units of its error.
    pub fn bound_significance(&self) -> f64 {
        (self.g_afc.g2 - classical_bound(&self.cs)) / self.g_afc.sigma
    }
}

/// `√(g_ss·g_ii)`.
pub fn classical_bound(cs: &CSResult) -> f64 {
    (cs.g2_ss.value * cs.g2_ii.value).sqrt()
}

/// Gated, duty-cycled storage of heralded photons. The same detected
/// photons are sent once through the pit (reference) and once through the
/// comb, so both paths share their heralds.
pub fn storage_point(setup: &PhotonSetup, p: &StorageParams, seed: u64) -> Result<StoragePoint> {
    let (pair, noise) = setup.rates(p.power_mw);
    let gate = GatingConfig::for_storage_time(p.tau_us)?;
    let opts = GenerateOptions {
        gating: Some(gate),
        duty: Some(p.duty),
        ..Default::default()
    };
    let s = generate_timetags(
        &setup.model,
        &setup.waveguide_chain,
        pair,
        &noise,
        p.duration_s,
        &opts,
        seed,
    )?;
    let pit = apply_spectral_filter(
        &s.signal,
        &SpectralFilter::pit(setup.pit_transmission),
        seed.wrapping_add(1),
    )?;
    let comb = apply_spectral_filter(
        &s.signal,
        &SpectralFilter::comb(setup.pit_transmission),
        seed.wrapping_add(1),
    )?;
    let echo = apply_memory_response(
        &comb,
        &MemoryResponse {
            eta_afc: p.eta_afc,
            tau_us: p.tau_us,
        },
        seed.wrapping_add(2),
    )?;

    let g_afc = afc_core::counting::afc_g2(
        &s.idler,
        &echo,
        p.tau_us,
        gate.pump_off_delay_us,
        setup.window_ns,
    )?;

    let windows = EchoWindows {
        window_ns: setup.window_ns,
        pit_transmission: setup.pit_transmission,
        ..EchoWindows::new(0.0, p.tau_us)
    };
    let h_echo = histogram(&s.idler, &echo)?;
    let h_pit = histogram(&s.idler, &pit)?;
    let eta_measured = internal_efficiency(&h_echo, &h_pit, &windows)?;
    let n_echo = h_echo.integrate(
        p.tau_us * 1e3 - 0.5 * setup.window_ns,
        p.tau_us * 1e3 + 0.5 * setup.window_ns,
    );
    let n_ref = h_pit.integrate(-0.5 * setup.window_ns, 0.5 * setup.window_ns);
    let eta_sigma = eta_measured * (1.0 / n_echo.max(1.0) + 1.0 / n_ref.max(1.0)).sqrt();

    let cs = cs_parameter(Measured::from(&g_afc), None, p.g_ii)?;
    Ok(StoragePoint {
        tau_us: p.tau_us,
        eta_set: p.eta_afc,
        eta_measured,
        eta_sigma,
        t_p_off_us: gate.pump_off_delay_us,
        g_afc,
        cs,
        heralds: s.idler.len(),
        live_s: s.live_s,
    })
}

/// Event counts by origin, for reports.
pub fn origin_counts(stream: &TimeTagStream) -> [(String, usize); 5] {
    [
        Origin::Pair,
        Origin::OtherMode,
        Origin::Broadband,
        Origin::Dark,
        Origin::Unknown,
    ]
    .map(|o| (format!("{o:?}").to_lowercase(), stream.count_origin(o)))
}
