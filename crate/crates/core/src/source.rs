//! Monte Carlo model of a cavity-enhanced SPDC pair source with its
//! detection chain: multimode thermal pair statistics, broadband noise,
//! dark counts, spectral filtering, pump gating and cryostat duty cycle.
//!
//! Internally times are in ns; emitted streams are in integer ps.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::timetag::{ns_to_ps, Origin, TimeTagStream, PS_PER_S};

pub const CH_IDLER: u8 = 0;
pub const CH_SIGNAL: u8 = 1;
pub const CH_SIGNAL_B: u8 = 2;
pub const CH_IDLER_B: u8 = 3;

/// Pump-off response of the gate, µs.
pub const MIN_PUMP_OFF_US: f64 = 1.2;
/// Kept between the gate closing and the echo, µs.
pub const GATE_LEAD_US: f64 = 0.3;
pub const MIN_STORAGE_US: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityFilter {
    pub fwhm_mhz: f64,
    pub fsr_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiphotonModel {
    pub gamma_s_mhz: f64,
    pub gamma_i_mhz: f64,
    pub biphoton_fwhm_mhz: f64,
    pub mode_count: u32,
    pub fsr_mhz: f64,
    pub filter_cavity: CavityFilter,
    pub etalon: CavityFilter,
}

impl Default for BiphotonModel {
    fn default() -> Self {
        Self {
            gamma_s_mhz: 2.5,
            gamma_i_mhz: 1.4,
            biphoton_fwhm_mhz: 1.8,
            mode_count: 8,
            fsr_mhz: 261.0,
            filter_cavity: CavityFilter {
                fwhm_mhz: 80.0,
                fsr_mhz: 17_000.0,
            },
            etalon: CavityFilter {
                fwhm_mhz: 4_250.0,
                fsr_mhz: 100_000.0,
            },
        }
    }
}

impl BiphotonModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.gamma_s_mhz,
            self.gamma_i_mhz,
            self.biphoton_fwhm_mhz,
            self.fsr_mhz,
            self.filter_cavity.fwhm_mhz,
            self.filter_cavity.fsr_mhz,
            self.etalon.fwhm_mhz,
            self.etalon.fsr_mhz,
        ];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return domain("biphoton model parameters must be positive");
        }
        if self.mode_count == 0 {
            return domain("at least one spectral mode is required");
        }
        Ok(())
    }

    /// Decay time of the signal side, `1/(2πΓ_s)`, ns.
    pub fn t_s_ns(&self) -> f64 {
        1e3 / (2.0 * PI * self.gamma_s_mhz)
    }

    pub fn t_i_ns(&self) -> f64 {
        1e3 / (2.0 * PI * self.gamma_i_mhz)
    }

    /// Thermal coherence cell, ns.
    pub fn cell_ns(&self) -> f64 {
        self.t_s_ns().max(self.t_i_ns())
    }

    /// Analytic mean of the signal-minus-idler delay, ns.
    pub fn mean_delay_ns(&self) -> f64 {
        self.t_s_ns() - self.t_i_ns()
    }

    /// Probability that a pair delay falls inside a window of width
    /// `window_ns` centred on zero delay.
    pub fn window_fraction(&self, window_ns: f64) -> f64 {
        let (ts, ti) = (self.t_s_ns(), self.t_i_ns());
        let h = 0.5 * window_ns;
        (ts * (1.0 - (-h / ts).exp()) + ti * (1.0 - (-h / ti).exp())) / (ts + ti)
    }
}

/// Signal-minus-idler delay in ns from the asymmetric double exponential.
pub fn sample_pair_delay<R: Rng + ?Sized>(model: &BiphotonModel, rng: &mut R) -> f64 {
    let (ts, ti) = (model.t_s_ns(), model.t_i_ns());
    let u: f64 = rng.random();
    let e: f64 = -(1.0 - rng.random::<f64>()).ln();
    if u < ts / (ts + ti) {
        ts * e
    } else {
        -ti * e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    /// Probability of detecting the signal photon given a herald, including
    /// the signal detector efficiency.
    pub herald_eff: f64,
    pub signal_det_eff: [f64; 2],
    pub idler_det_eff: [f64; 2],
    pub signal_dark_hz: [f64; 2],
    pub idler_dark_hz: [f64; 2],
}

impl DetectionChain {
    pub const HERALD_EFF_SOURCE: f64 = 0.25;
    pub const HERALD_EFF_WAVEGUIDE: f64 = 0.07;

    /// Signal detected straight after the source.
    pub fn source() -> Self {
        Self {
            herald_eff: Self::HERALD_EFF_SOURCE,
            signal_det_eff: [0.5, 0.5],
            idler_det_eff: [0.10, 0.10],
            signal_dark_hz: [10.0, 50.0],
            idler_dark_hz: [10.0, 400.0],
        }
    }

    /// Signal detected after the waveguide.
    pub fn waveguide() -> Self {
        Self {
            herald_eff: Self::HERALD_EFF_WAVEGUIDE,
            ..Self::source()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let effs = [
            self.herald_eff,
            self.signal_det_eff[0],
            self.signal_det_eff[1],
            self.idler_det_eff[0],
            self.idler_det_eff[1],
        ];
        if effs.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return domain("efficiencies must lie in [0, 1]");
        }
        if self
            .signal_dark_hz
            .iter()
            .chain(&self.idler_dark_hz)
            .any(|r| !(*r >= 0.0) || !r.is_finite())
        {
            return domain("dark rates must be non-negative");
        }
        Ok(())
    }

    /// Per-photon detection probabilities `[a, b]` on the signal arm.
    fn signal_split(&self, hbt: bool) -> [f64; 2] {
        split(self.herald_eff, self.signal_det_eff, hbt)
    }

    fn idler_split(&self, hbt: bool) -> [f64; 2] {
        if hbt {
            [0.5 * self.idler_det_eff[0], 0.5 * self.idler_det_eff[1]]
        } else {
            [self.idler_det_eff[0], 0.0]
        }
    }
}

fn split(total: f64, eff: [f64; 2], hbt: bool) -> [f64; 2] {
    if !hbt {
        return [total, 0.0];
    }
    let s = eff[0] + eff[1];
    if s <= 0.0 {
        return [0.0, 0.0];
    }
    [total * eff[0] / s, total * eff[1] / s]
}

/// Uncorrelated source emission on the signal arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseRates {
    /// Broadband photons emitted into the signal path, per second.
    pub broadband_hz: f64,
}

/// Pump gating triggered by heralds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatingConfig {
    pub pump_off_delay_us: f64,
    pub storage_time_us: f64,
    /// Time the pump stays off once closed, µs.
    pub hold_us: f64,
}

impl GatingConfig {
    /// `t_P^off = max(1.2, τ - 0.3)`, held off for `τ`.
    pub fn for_storage_time(tau_us: f64) -> Result<Self> {
        let g = Self {
            pump_off_delay_us: pump_off_delay(tau_us),
            storage_time_us: tau_us,
            hold_us: tau_us,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.storage_time_us < MIN_STORAGE_US - 1e-12 {
            return domain(format!("storage time must be at least {MIN_STORAGE_US} µs"));
        }
        if self.pump_off_delay_us < MIN_PUMP_OFF_US - 1e-12 {
            return domain(format!(
                "pump-off delay must be at least {MIN_PUMP_OFF_US} µs"
            ));
        }
        if !(self.hold_us > 0.0) {
            return domain("gate hold time must be positive");
        }
        Ok(())
    }
}

/// Gate response rule: `max(1.2, τ - 0.3)` µs.
pub fn pump_off_delay(tau_us: f64) -> f64 {
    MIN_PUMP_OFF_US.max(tau_us - GATE_LEAD_US)
}

/// Measurement windows synchronised with the cryostat cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyCycle {
    pub cryostat_hz: f64,
    pub live_fraction: f64,
}

impl DutyCycle {
    /// 21% of each 1.4 Hz cycle.
    pub fn afc() -> Self {
        Self {
            cryostat_hz: 1.4,
            live_fraction: 0.21,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cryostat_hz > 0.0) || !(self.live_fraction > 0.0 && self.live_fraction <= 1.0) {
            return domain("duty cycle needs a positive frequency and a live fraction in (0, 1]");
        }
        if self.live_fraction / self.cryostat_hz >= 0.3 {
            return domain("live window must be shorter than 300 ms");
        }
        Ok(())
    }

    fn live_intervals_ns(&self, duration_ns: f64) -> Vec<(f64, f64)> {
        let period = 1e9 / self.cryostat_hz;
        let live = period * self.live_fraction;
        let mut out = Vec::new();
        let mut k = 0.0;
        while k * period < duration_ns {
            let a = k * period;
            out.push((a, (a + live).min(duration_ns)));
            k += 1.0;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct GenerateOptions {
    /// Split the signal arm onto two detectors.
    pub hbt_signal: bool,
    /// Split the idler arm onto two detectors.
    pub hbt_idler: bool,
    pub gating: Option<GatingConfig>,
    pub duty: Option<DutyCycle>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceStreams {
    pub idler: TimeTagStream,
    pub idler_b: Option<TimeTagStream>,
    pub signal: TimeTagStream,
    pub signal_b: Option<TimeTagStream>,
    pub duration_s: f64,
    /// Total live acquisition time, s.
    pub live_s: f64,
}

impl SourceStreams {
    pub fn all(&self) -> Vec<&TimeTagStream> {
        let mut v = vec![&self.idler, &self.signal];
        v.extend(self.signal_b.as_ref());
        v.extend(self.idler_b.as_ref());
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Emission {
    /// Heralded-mode pair with its detection outcomes already drawn.
    Pair {
        signal: Option<u8>,
        idler: Option<(f64, u8)>,
    },
    Signal {
        channel: u8,
        origin: Origin,
    },
    Dark {
        channel: u8,
    },
}

/// Gap and extra-occupancy distributions for cells with mean occupation
/// `mu`; `None` when nothing is emitted.
fn thermal_cells(mu: f64) -> Option<(Geometric, Geometric)> {
    let p = mu / (1.0 + mu);
    (p > 0.0).then(|| {
        (
            Geometric::new(p).expect("probability"),
            Geometric::new(1.0 - p).expect("probability"),
        )
    })
}

/// Cells per generation chunk, about a millisecond of emission.
const CHUNK_CELLS: u64 = 8192;

fn pick(rng: &mut ChaCha8Rng, p: [f64; 2], channels: [u8; 2]) -> Option<u8> {
    let u: f64 = rng.random();
    if u < p[0] {
        Some(channels[0])
    } else if u < p[0] + p[1] {
        Some(channels[1])
    } else {
        None
    }
}

fn poisson_times(
    rng: &mut ChaCha8Rng,
    rate_hz: f64,
    lo: f64,
    hi: f64,
    mut visit: impl FnMut(&mut ChaCha8Rng, f64),
) {
    if rate_hz <= 0.0 {
        return;
    }
    let exp = Exp::new(rate_hz * 1e-9).expect("positive rate");
    let mut t = lo;
    loop {
        t += exp.sample(rng);
        if t >= hi {
            break;
        }
        visit(rng, t);
    }
}

/// Draws detection streams. Pairs are emitted independently in each of the
/// `N` modes with geometric (thermal) occupation of coherence cells; only
/// mode 0 passes the idler filter. `pair_rate_hz` is the emission rate per
/// mode.
pub fn generate_timetags(
    model: &BiphotonModel,
    chain: &DetectionChain,
    pair_rate_hz: f64,
    noise: &NoiseRates,
    duration_s: f64,
    options: &GenerateOptions,
    seed: u64,
) -> Result<SourceStreams> {
    model.validate()?;
    chain.validate()?;
    if !(pair_rate_hz >= 0.0) || !(noise.broadband_hz >= 0.0) {
        return domain("rates must be non-negative");
    }
    if !(duration_s > 0.0) {
        return domain("duration must be positive");
    }
    if duration_s * PS_PER_S >= u64::MAX as f64 {
        return Err(Error::Overflow(format!(
            "{duration_s} s exceeds the 64-bit picosecond range"
        )));
    }
    if let Some(g) = &options.gating {
        g.validate()?;
    }
    if let Some(d) = &options.duty {
        d.validate()?;
    }

    let duration_ns = duration_s * 1e9;
    let intervals = match &options.duty {
        Some(d) => d.live_intervals_ns(duration_ns),
        None => vec![(0.0, duration_ns)],
    };
    let live_s = intervals.iter().map(|(a, b)| b - a).sum::<f64>() * 1e-9;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = model.cell_ns();
    let mu_cell = pair_rate_hz * cell * 1e-9;

    let sig_p = chain.signal_split(options.hbt_signal);
    let idl_p = chain.idler_split(options.hbt_idler);
    let (q_s, q_i) = (sig_p[0] + sig_p[1], idl_p[0] + idl_p[1]);
    // Thinning a thermal cell keeps it thermal, so only pairs with at least
    // one click are drawn: mode 0 keeps pairs with a signal or idler click,
    // the other modes keep detected signals.
    let q_any = 1.0 - (1.0 - q_s) * (1.0 - q_i);
    let heralded_cells = thermal_cells(mu_cell * q_any);
    let other_cells = thermal_cells(mu_cell * q_s);
    let sig_cond = [sig_p[0] / q_s, sig_p[1] / q_s];
    let idl_cond = [idl_p[0] / q_i, idl_p[1] / q_i];
    let darks = [
        (CH_IDLER, chain.idler_dark_hz[0]),
        (CH_SIGNAL, chain.signal_dark_hz[0]),
        (
            CH_SIGNAL_B,
            if options.hbt_signal {
                chain.signal_dark_hz[1]
            } else {
                0.0
            },
        ),
        (
            CH_IDLER_B,
            if options.hbt_idler {
                chain.idler_dark_hz[1]
            } else {
                0.0
            },
        ),
    ];

    let mut out: [Vec<(u64, Origin)>; 4] = Default::default();
    let mut gates: VecDeque<(f64, f64)> = VecDeque::new();
    let mut emissions = Vec::new();

    for &(lo, hi) in &intervals {
        let first = (lo / cell).floor() as u64;
        let last = (hi / cell).ceil() as u64;
        let mut chunk = first;
        while chunk < last {
            let chunk_end = (chunk + CHUNK_CELLS).min(last);
            let (clo, chi) = (
                (chunk as f64 * cell).max(lo),
                (chunk_end as f64 * cell).min(hi),
            );
            emissions.clear();
            for mode in 0..model.mode_count {
                let cells = if mode == 0 {
                    &heralded_cells
                } else {
                    &other_cells
                };
                let Some((gap, extra)) = cells else { continue };
                let mut c = chunk;
                loop {
                    c = c.saturating_add(gap.sample(&mut rng));
                    if c >= chunk_end {
                        break;
                    }
                    let n = 1 + extra.sample(&mut rng);
                    for _ in 0..n {
                        let t = (c as f64 + rng.random::<f64>()) * cell;
                        if !(t >= lo && t < hi) {
                            continue;
                        }
                        if mode != 0 {
                            let channel = pick(&mut rng, sig_cond, [CH_SIGNAL, CH_SIGNAL_B])
                                .unwrap_or(CH_SIGNAL_B);
                            emissions.push((
                                t,
                                Emission::Signal {
                                    channel,
                                    origin: Origin::OtherMode,
                                },
                            ));
                            continue;
                        }
                        let u = rng.random::<f64>() * q_any;
                        let (has_s, has_i) = if u < q_s * q_i {
                            (true, true)
                        } else if u < q_s {
                            (true, false)
                        } else {
                            (false, true)
                        };
                        let signal = has_s.then(|| {
                            pick(&mut rng, sig_cond, [CH_SIGNAL, CH_SIGNAL_B])
                                .unwrap_or(CH_SIGNAL_B)
                        });
                        let ti = t - sample_pair_delay(model, &mut rng);
                        let idler = (has_i && ti >= 0.0 && ti < duration_ns).then(|| {
                            (
                                ti,
                                pick(&mut rng, idl_cond, [CH_IDLER, CH_IDLER_B])
                                    .unwrap_or(CH_IDLER_B),
                            )
                        });
                        if signal.is_some() || idler.is_some() {
                            emissions.push((t, Emission::Pair { signal, idler }));
                        }
                    }
                    c += 1;
                }
            }
            poisson_times(&mut rng, noise.broadband_hz * q_s, clo, chi, |rng, t| {
                let channel = pick(rng, sig_cond, [CH_SIGNAL, CH_SIGNAL_B]).unwrap_or(CH_SIGNAL_B);
                emissions.push((
                    t,
                    Emission::Signal {
                        channel,
                        origin: Origin::Broadband,
                    },
                ));
            });
            for (channel, rate) in darks {
                poisson_times(&mut rng, rate, clo, chi, |_, t| {
                    emissions.push((t, Emission::Dark { channel }))
                });
            }
            emissions.sort_by(|a, b| a.0.total_cmp(&b.0));

            for &(t, kind) in &emissions {
                while gates.front().is_some_and(|g| g.1 <= t) {
                    gates.pop_front();
                }
                let gated = gates.iter().any(|g| g.0 <= t && t < g.1);
                let mut herald = None;
                match kind {
                    Emission::Dark { channel } => {
                        out[channel as usize].push((ns_to_ps(t)?, Origin::Dark));
                        if channel == CH_IDLER {
                            herald = Some(t);
                        }
                    }
                    _ if gated => {}
                    Emission::Signal { channel, origin } => {
                        out[channel as usize].push((ns_to_ps(t)?, origin))
                    }
                    Emission::Pair { signal, idler } => {
                        if let Some(ch) = signal {
                            out[ch as usize].push((ns_to_ps(t)?, Origin::Pair));
                        }
                        if let Some((ti, ch)) = idler {
                            out[ch as usize].push((ns_to_ps(ti)?, Origin::Pair));
                            if ch == CH_IDLER {
                                herald = Some(ti);
                            }
                        }
                    }
                }
                if let (Some(h), Some(g)) = (herald, &options.gating) {
                    let from = h + g.pump_off_delay_us * 1e3;
                    gates.push_back((from, from + g.hold_us * 1e3));
                }
            }
            chunk = chunk_end;
        }
    }

    let [idler, signal, signal_b, idler_b] = out;
    Ok(SourceStreams {
        idler: TimeTagStream::from_unsorted(CH_IDLER, idler),
        idler_b: options
            .hbt_idler
            .then(|| TimeTagStream::from_unsorted(CH_IDLER_B, idler_b)),
        signal: TimeTagStream::from_unsorted(CH_SIGNAL, signal),
        signal_b: options
            .hbt_signal
            .then(|| TimeTagStream::from_unsorted(CH_SIGNAL_B, signal_b)),
        duration_s,
        live_s,
    })
}

/// Expected detection rates (per second of wall time) for an ungated run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub herald_hz: f64,
    pub signal_hz: f64,
}

pub fn expected_rates(
    model: &BiphotonModel,
    chain: &DetectionChain,
    pair_rate_hz: f64,
    noise: &NoiseRates,
    options: &GenerateOptions,
) -> ExpectedRates {
    let live = options.duty.map_or(1.0, |d| d.live_fraction);
    let idl = chain.idler_split(options.hbt_idler)[0];
    let sig = chain.signal_split(options.hbt_signal)[0];
    let emitted = pair_rate_hz * model.mode_count as f64 + noise.broadband_hz;
    ExpectedRates {
        herald_hz: live * (pair_rate_hz * idl + chain.idler_dark_hz[0]),
        signal_hz: live * (emitted * sig + chain.signal_dark_hz[0]),
    }
}

/// Per-origin transmission of a spectral filter on the signal arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFilter {
    pub pair: f64,
    pub other_mode: f64,
    pub broadband: f64,
}

impl SpectralFilter {
    /// Transparency window: passes the heralded mode and in-band noise at
    /// `transmission`, absorbs every other mode.
    pub fn pit(transmission: f64) -> Self {
        Self {
            pair: transmission,
            other_mode: 0.0,
            broadband: transmission,
        }
    }

    /// Comb path before storage: the heralded mode enters the memory
    /// unattenuated, noise is transmitted like the pit.
    pub fn comb(pit_transmission: f64) -> Self {
        Self {
            pair: 1.0,
            other_mode: 0.0,
            broadband: pit_transmission,
        }
    }
}

/// Thins events by origin; dark counts are untouched.
pub fn apply_spectral_filter(
    stream: &TimeTagStream,
    filter: &SpectralFilter,
    seed: u64,
) -> Result<TimeTagStream> {
    for t in [filter.pair, filter.other_mode, filter.broadband] {
        if !(0.0..=1.0).contains(&t) {
            return domain("filter transmissions must lie in [0, 1]");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(stream.filtered(|_, o| {
        let p = match o {
            Origin::Pair | Origin::Unknown => filter.pair,
            Origin::OtherMode => filter.other_mode,
            Origin::Broadband => filter.broadband,
            Origin::Dark => return true,
        };
        rng.random::<f64>() < p
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryResponse {
    pub eta_afc: f64,
    pub tau_us: f64,
}

/// Stores resonant photons: each heralded-mode event survives with
/// probability `η_AFC` and is re-emitted `τ` later. Other-mode photons are
/// absorbed; broadband noise and dark counts pass unchanged.
pub fn apply_memory_response(
    stream: &TimeTagStream,
    response: &MemoryResponse,
    seed: u64,
) -> Result<TimeTagStream> {
    if !(0.0..=1.0).contains(&response.eta_afc) || !(response.tau_us >= 0.0) {
        return domain("η_AFC must lie in [0, 1] and τ be non-negative");
    }
    let shift = (response.tau_us * 1e6).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(stream.len());
    for (t, o) in stream.iter() {
        match o {
            Origin::Pair | Origin::Unknown => {
                if rng.random::<f64>() < response.eta_afc {
                    let shifted = t.checked_add(shift).ok_or_else(|| {
                        Error::Overflow("delayed timestamp exceeds 64 bits".into())
                    })?;
                    events.push((shifted, o));
                }
            }
            Origin::OtherMode => {}
            Origin::Broadband | Origin::Dark => events.push((t, o)),
        }
    }
    Ok(TimeTagStream::from_unsorted(stream.channel(), events))
}

/// Pair and noise levels that reproduce target cross-correlations before
/// and after the pit, to first order in the pair number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitCalibration {
    /// Heralded-mode pairs per correlation window.
    pub mu_window: f64,
    /// Broadband emission relative to the per-mode pair rate.
    pub broadband_ratio: f64,
    pub pair_rate_hz: f64,
    pub broadband_hz: f64,
}

/// Solves `g_pre - 1 = f/((N + b)µ)` and `g_post - 1 = f/((1 + b)µ)` for
/// `µ` and `b`, with `f` the fraction of pair delays inside the window.
pub fn calibrate_pit(
    model: &BiphotonModel,
    g_pre: f64,
    g_post: f64,
    window_ns: f64,
) -> Result<PitCalibration> {
    model.validate()?;
    let n = model.mode_count as f64;
    if !(g_pre > 1.0 && g_post > g_pre) || !(window_ns > 0.0) {
        return domain("calibration needs 1 < g_pre < g_post and a positive window");
    }
    let r = (g_post - 1.0) / (g_pre - 1.0);
    if r >= n {
        return domain(format!(
            "a gain of {r:.2} is more than {n} modes can explain"
        ));
    }
    let b = (n - r) / (r - 1.0);
    let f = model.window_fraction(window_ns);
    let mu = f / ((1.0 + b) * (g_post - 1.0));
    let pair_rate_hz = mu / (window_ns * 1e-9);
    Ok(PitCalibration {
        mu_window: mu,
        broadband_ratio: b,
        pair_rate_hz,
        broadband_hz: b * pair_rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_mean_and_sides() {
        let m = BiphotonModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_pair_delay(&m, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let (ts, ti) = (m.t_s_ns(), m.t_i_ns());
        let expected = (ts * ts - ti * ti) / (ts + ti);
        assert!((mean - expected).abs() < 3.0 * (var / n as f64).sqrt());
        let pos = xs.iter().filter(|x| **x >= 0.0).count() as f64 / n as f64;
        assert!((pos - ts / (ts + ti)).abs() < 0.005);
    }

    #[test]
    fn gating_rule() {
        assert_eq!(pump_off_delay(1.5), 1.2);
        assert!((pump_off_delay(5.5) - 5.2).abs() < 1e-12);
        assert!(GatingConfig::for_storage_time(1.0).is_err());
    }

    #[test]
    fn darks_only() {
        let chain = DetectionChain {
            idler_dark_hz: [10.0, 0.0],
            ..DetectionChain::source()
        };
        let s = generate_timetags(
            &BiphotonModel::default(),
            &chain,
            0.0,
            &NoiseRates::default(),
            100.0,
            &GenerateOptions::default(),
            5,
        )
        .unwrap();
        let n = s.idler.len() as f64;
        assert!((n - 1000.0).abs() < 3.0 * 1000f64.sqrt(), "{n}");
        assert!(s.signal.origins().iter().all(|o| *o == Origin::Dark));
    }

    #[test]
    fn generation_is_deterministic() {
        let go = || {
            generate_timetags(
                &BiphotonModel::default(),
                &DetectionChain::source(),
                20_000.0,
                &NoiseRates {
                    broadband_hz: 5_000.0,
                },
                0.5,
                &GenerateOptions {
                    hbt_signal: true,
                    gating: Some(GatingConfig::for_storage_time(1.5).unwrap()),
                    ..Default::default()
                },
                99,
            )
            .unwrap()
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn memory_response_identity_and_thinning() {
        let ts: Vec<u64> = (0..10_000).map(|k| k * 1_000_000).collect();
        let s = TimeTagStream::new(1, ts).unwrap();
        let same = apply_memory_response(
            &s,
            &MemoryResponse {
                eta_afc: 1.0,
                tau_us: 0.0,
            },
            1,
        )
        .unwrap();
        assert_eq!(same, s);
        let half = apply_memory_response(
            &s,
            &MemoryResponse {
                eta_afc: 0.5,
                tau_us: 1.5,
            },
            1,
        )
        .unwrap();
        assert!((half.len() as f64 - 5000.0).abs() <= 150.0);
        assert!(half
            .timestamps()
            .iter()
            .all(|t| (t - 1_500_000) % 1_000_000 == 0));
    }

    #[test]
    fn calibration_reproduces_targets() {
        let m = BiphotonModel::default();
        let c = calibrate_pit(&m, 13.8, 36.0, 400.0).unwrap();
        let f = m.window_fraction(400.0);
        let n = m.mode_count as f64;
        let b = c.broadband_ratio;
        assert!((1.0 + f / ((n + b) * c.mu_window) - 13.8).abs() < 1e-9);
        assert!((1.0 + f / ((1.0 + b) * c.mu_window) - 36.0).abs() < 1e-9);
        assert!(calibrate_pit(&m, 2.0, 100.0, 400.0).is_err());
    }
}
