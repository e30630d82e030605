//! AFC storage: linear-response propagation through a shaped absorption
//! profile, a discrete-atom rephasing oracle, echo efficiencies and the
//! effective dephasing-time fit.
//!
//! Times are in µs and frequencies in MHz, so `ν·t` is in cycles.

use std::f64::consts::{LN_2, PI};
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{domain, Error, Result};
use crate::fit::{fit_exp_decay, Estimate, ExpFit};
use crate::spectral::{AbsorptionProfile, CombSpec};

/// Echo and reference windows, ns.
pub const DEFAULT_WINDOW_NS: f64 = 400.0;
/// Pit transmission used to renormalise the reference.
pub const DEFAULT_PIT_TRANSMISSION: f64 = 0.85;
/// Fibre-to-waveguide coupling.
pub const DEFAULT_COUPLING: f64 = 0.40;
/// Trace sampling for storage simulations.
pub const TRACE_DT_US: f64 = 0.01;
pub const TRACE_LEN: usize = 16384;

/// Discrete atoms with detunings `δ_k` (MHz) and amplitudes `c_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomEnsemble {
    detunings: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomEnsemble {
    /// Requires `Σ c_k² = 1` within 1e-9.
    pub fn new(detunings: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if detunings.len() != weights.len() {
            return domain("detuning and weight lists differ in length");
        }
        if detunings.is_empty() {
            return domain("empty ensemble");
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || detunings.iter().any(|d| !d.is_finite()) {
            return domain("weights must be non-negative and detunings finite");
        }
        let norm: f64 = weights.iter().map(|w| w * w).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return domain(format!("weights are not normalised (Σc² = {norm})"));
        }
        Ok(Self { detunings, weights })
    }

    /// Rescales `weights` to unit norm before validating.
    pub fn normalized(detunings: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let norm: f64 = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return domain("weights sum to zero");
        }
        Self::new(detunings, weights.iter().map(|w| w / norm).collect())
    }

    /// Uniform-weight atoms at `m·Δ` for `m` in `-half..=half`.
    pub fn uniform_comb(periodicity_mhz: f64, half: usize) -> Result<Self> {
        let d: Vec<f64> = (-(half as i64)..=half as i64)
            .map(|m| m as f64 * periodicity_mhz)
            .collect();
        let w = vec![1.0; d.len()];
        Self::normalized(d, w)
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }
}

/// `|Σ c_k e^{-i2πδ_k t}|²`, normalised to its value at `t = 0`.
pub fn echo_from_atoms(ensemble: &AtomEnsemble, times_us: &[f64]) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return domain("empty ensemble");
    }
    let at = |t: f64| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (d, c) in ensemble.detunings.iter().zip(&ensemble.weights) {
            acc += Complex64::from_polar(*c, -2.0 * PI * d * t);
        }
        acc.norm_sqr()
    };
    let zero = at(0.0);
    if !(zero > 0.0) {
        return domain("ensemble has zero total amplitude");
    }
    Ok(times_us.iter().map(|&t| at(t) / zero).collect())
}

/// Complex field on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrace {
    pub t0_us: f64,
    pub dt_us: f64,
    pub amplitude: Vec<Complex64>,
}

impl FieldTrace {
    pub fn new(t0_us: f64, dt_us: f64, amplitude: Vec<Complex64>) -> Result<Self> {
        if !(dt_us > 0.0) || !t0_us.is_finite() {
            return Err(Error::Grid("trace needs a positive time step".into()));
        }
        if amplitude
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return domain("trace contains non-finite samples");
        }
        Ok(Self {
            t0_us,
            dt_us,
            amplitude,
        })
    }

    /// Gaussian pulse with intensity FWHM `fwhm_ns` centred at `center_us`.
    pub fn gaussian(
        t0_us: f64,
        dt_us: f64,
        len: usize,
        center_us: f64,
        fwhm_ns: f64,
    ) -> Result<Self> {
        if !(fwhm_ns > 0.0) {
            return domain("pulse width must be positive");
        }
        let w = fwhm_ns * 1e-3;
        let amp = (0..len)
            .map(|i| {
                let t = t0_us + dt_us * i as f64 - center_us;
                Complex64::new((-2.0 * LN_2 * t * t / (w * w)).exp(), 0.0)
            })
            .collect();
        Self::new(t0_us, dt_us, amp)
    }

    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0_us + self.dt_us * i as f64
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dt_us
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            amplitude: self.amplitude.iter().map(|a| a * s).collect(),
            ..self.clone()
        }
    }

    /// Same samples, re-timed by `shift_us`.
    pub fn shifted(&self, shift_us: f64) -> Self {
        Self {
            t0_us: self.t0_us + shift_us,
            ..self.clone()
        }
    }

    /// Time of the most intense sample with `lo <= t <= hi`.
    pub fn argmax_in(&self, lo_us: f64, hi_us: f64) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for (i, a) in self.amplitude.iter().enumerate() {
            let t = self.time(i);
            if t >= lo_us && t <= hi_us {
                let v = a.norm_sqr();
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((t, v));
                }
            }
        }
        best.map(|(t, _)| t)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time_us,re,im")?;
        for (i, a) in self.amplitude.iter().enumerate() {
            writeln!(out, "{:.6},{:.9e},{:.9e}", self.time(i), a.re, a.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut t = Vec::new();
        let mut amp = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("time") {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
            if cols.len() != 3 {
                return Err(Error::Format(format!("line {}: expected 3 columns", n + 1)));
            }
            t.push(cols[0]);
            amp.push(Complex64::new(cols[1], cols[2]));
        }
        if t.len() < 2 {
            return Err(Error::Format("trace needs at least two rows".into()));
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if t.iter()
            .enumerate()
            .any(|(i, x)| (x - t[0] - dt * i as f64).abs() > 1e-6 + 1e-6 * dt)
        {
            return Err(Error::Grid("time column is not uniform".into()));
        }
        Self::new(t[0], dt, amp)
    }
}

/// Baseband frequencies (MHz) of the centred DFT of a trace with `n`
/// samples spaced `dt_us`.
pub fn fft_frequencies(n: usize, dt_us: f64) -> Vec<f64> {
    let df = 1.0 / (n as f64 * dt_us);
    (0..n).map(|j| (j as f64 - (n / 2) as f64) * df).collect()
}

/// Causal complex exponent `α_c` with `Re α_c = a` on a centred DFT grid.
/// `exp(-α_c)` is then the transfer function of a causal, passive medium
/// whose amplitude attenuation is `a`; the accompanying phase is
/// `-Im α_c`. The imaginary part is the discrete Hilbert transform of `a`.
pub fn causal_exponent(a: &[f64]) -> Vec<Complex64> {
    let n = a.len();
    let spec: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut lag = dft::centered_inverse(&spec);
    let half = n / 2;
    for (k, v) in lag.iter_mut().enumerate() {
        let w = if k == half || (n.is_multiple_of(2) && k == 0) {
            1.0
        } else if k > half {
            2.0
        } else {
            0.0
        };
        *v *= w / n as f64;
    }
    dft::centered_forward(&lag)
}

/// Passes `input` through the medium described by `profile`, which applies
/// `exp(-OD/2 + iφ)` to the field spectrum with `φ` the causal phase. The
/// field carrier sits at the profile's zero frequency; OD outside the
/// profile grid takes the edge value.
pub fn propagate_pulse(profile: &AbsorptionProfile, input: &FieldTrace) -> Result<FieldTrace> {
    let n = input.len();
    if n < 2 {
        return Err(Error::Grid("trace too short to transform".into()));
    }
    let freqs = fft_frequencies(n, input.dt_us);
    let spec = dft::centered_forward(&input.amplitude);
    let grid = profile.grid();
    let (lo, hi) = (grid.start_mhz, grid.end_mhz());
    let (mut total, mut outside) = (0.0, 0.0);
    for (f, s) in freqs.iter().zip(&spec) {
        let e = s.norm_sqr();
        total += e;
        if *f < lo || *f > hi {
            outside += e;
        }
    }
    if total > 0.0 && outside > 0.01 * total {
        return Err(Error::Grid(format!(
            "{:.1}% of the input spectrum lies outside the profile grid",
            100.0 * outside / total
        )));
    }
    let half_od: Vec<f64> = freqs.iter().map(|&f| 0.5 * profile.od_at(f)).collect();
    let alpha = causal_exponent(&half_od);
    let out_spec: Vec<Complex64> = spec
        .iter()
        .zip(&alpha)
        .map(|(s, a)| s * (-a).exp())
        .collect();
    let amp = dft::centered_inverse(&out_spec)
        .into_iter()
        .map(|c| c / n as f64)
        .collect();
    FieldTrace::new(input.t0_us, input.dt_us, amp)
}

/// Something that can be integrated over a time window: field energy for
/// classical traces, counts for coincidence histograms.
pub trait WindowIntegral {
    /// Integral over `|t - center| <= width/2`. Errors when the window
    /// leaves the data range.
    fn window_integral(&self, center_us: f64, width_us: f64) -> Result<f64>;
}

impl WindowIntegral for FieldTrace {
    fn window_integral(&self, center_us: f64, width_us: f64) -> Result<f64> {
        let (lo, hi) = (center_us - width_us / 2.0, center_us + width_us / 2.0);
        let tol = 1e-6;
        let i_lo = ((lo - self.t0_us) / self.dt_us - tol).ceil();
        let i_hi = ((hi - self.t0_us) / self.dt_us + tol).floor();
        if self.is_empty() || i_lo < 0.0 || i_hi > (self.len() - 1) as f64 {
            return Err(Error::Grid(format!(
                "window [{lo:.3}, {hi:.3}] µs leaves the trace"
            )));
        }
        let s: f64 = self.amplitude[i_lo as usize..=i_hi as usize]
            .iter()
            .map(|a| a.norm_sqr())
            .sum();
        Ok(s * self.dt_us)
    }
}

/// Windowing convention for efficiency measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoWindows {
    /// Nominal arrival of the input; the reference window is centred here.
    pub input_time_us: f64,
    pub tau_us: f64,
    pub window_ns: f64,
    pub pit_transmission: f64,
}

impl EchoWindows {
    pub fn new(input_time_us: f64, tau_us: f64) -> Self {
        Self {
            input_time_us,
            tau_us,
            window_ns: DEFAULT_WINDOW_NS,
            pit_transmission: DEFAULT_PIT_TRANSMISSION,
        }
    }

    fn check(&self) -> Result<f64> {
        if !(self.pit_transmission > 0.0 && self.pit_transmission <= 1.0) {
            return domain("pit transmission must lie in (0, 1]");
        }
        if !(self.window_ns > 0.0 && self.tau_us > 0.0) {
            return domain("window and storage time must be positive");
        }
        let w = self.window_ns * 1e-3;
        if self.tau_us < w {
            return domain(format!(
                "echo window at τ = {} µs overlaps the {} ns input window",
                self.tau_us, self.window_ns
            ));
        }
        Ok(w)
    }

    pub fn echo_center_us(&self) -> f64 {
        self.input_time_us + self.tau_us
    }
}

/// `η_AFC`: echo-window integral of `output` over the input-window
/// integral of `reference` divided by the pit transmission.
pub fn internal_efficiency<O, R>(output: &O, reference: &R, windows: &EchoWindows) -> Result<f64>
where
    O: WindowIntegral + ?Sized,
    R: WindowIntegral + ?Sized,
{
    internal_efficiency_averaged(output, &[reference], windows)
}

/// As [`internal_efficiency`], with the reference averaged over several
/// pit measurements (typically one before and one after storage).
pub fn internal_efficiency_averaged<O, R>(
    output: &O,
    references: &[&R],
    windows: &EchoWindows,
) -> Result<f64>
where
    O: WindowIntegral + ?Sized,
    R: WindowIntegral + ?Sized,
{
    let w = windows.check()?;
    if references.is_empty() {
        return domain("at least one reference is required");
    }
    let echo = output.window_integral(windows.echo_center_us(), w)?;
    let mut sum = 0.0;
    for r in references {
        sum += r.window_integral(windows.input_time_us, w)?;
    }
    let reference = sum / references.len() as f64;
    if !(reference > 0.0) {
        return domain("reference window is empty");
    }
    Ok(echo / (reference / windows.pit_transmission))
}

/// `η_AFC · coupling`.
pub fn total_efficiency(eta_afc: f64, coupling: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta_afc) || !(0.0..=1.0).contains(&coupling) {
        return domain("efficiency and coupling must lie in [0, 1]");
    }
    Ok(eta_afc * coupling)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageResult {
    pub output: FieldTrace,
    pub echo_time_us: f64,
    pub internal_efficiency: f64,
    pub total_efficiency: f64,
}

#[derive(Serialize)]
struct StorageRecord {
    echo_time_us: f64,
    internal_efficiency: f64,
    total_efficiency: f64,
    output: Vec<[f64; 3]>,
}

impl StorageResult {
    pub fn to_json(&self) -> Result<String> {
        let rec = StorageRecord {
            echo_time_us: self.echo_time_us,
            internal_efficiency: self.internal_efficiency,
            total_efficiency: self.total_efficiency,
            output: self
                .output
                .amplitude
                .iter()
                .enumerate()
                .map(|(i, a)| [self.output.time(i), a.re, a.im])
                .collect(),
        };
        Ok(serde_json::to_string(&rec)?)
    }
}

/// Stores `input` in `comb_profile` and measures the echo against the same
/// pulse sent through `pit_profile`. The echo time is taken from the
/// intensity maximum within half a period of the nominal `τ`.
pub fn simulate_storage(
    comb_profile: &AbsorptionProfile,
    pit_profile: &AbsorptionProfile,
    input: &FieldTrace,
    windows: &EchoWindows,
    coupling: f64,
) -> Result<StorageResult> {
    let output = propagate_pulse(comb_profile, input)?;
    let reference = propagate_pulse(pit_profile, input)?;
    let eta = internal_efficiency(&output, &reference, windows)?.min(1.0);
    let c = windows.echo_center_us();
    let peak = output
        .argmax_in(c - 0.5 * windows.tau_us, c + 0.5 * windows.tau_us)
        .ok_or_else(|| Error::Grid("echo window leaves the trace".into()))?;
    Ok(StorageResult {
        output,
        echo_time_us: peak - windows.input_time_us,
        internal_efficiency: eta,
        total_efficiency: total_efficiency(eta, coupling)?,
    })
}

/// Default storage trace: 16384 samples at 10 ns with the input centred at
/// `input_time_us`.
pub fn storage_input(input_time_us: f64, fwhm_ns: f64) -> Result<FieldTrace> {
    FieldTrace::gaussian(0.0, TRACE_DT_US, TRACE_LEN, input_time_us, fwhm_ns)
}

/// Echo efficiency versus storage time, from the comb geometry.
pub fn comb_for_tau(base: &CombSpec, tau_us: f64) -> CombSpec {
    let finesse = base.periodicity_mhz / base.tooth_fwhm_mhz;
    let periodicity_mhz = 1.0 / tau_us;
    CombSpec {
        periodicity_mhz,
        tooth_fwhm_mhz: periodicity_mhz / finesse,
        ..*base
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct T2StarFit {
    pub eta0: f64,
    pub t2star_us: Estimate,
    pub fit: ExpFit,
}

/// Fits `η(τ) = η₀ exp(-4τ/T2*)` by log-linear least squares.
pub fn fit_effective_t2star(points: &[(f64, f64)]) -> Result<T2StarFit> {
    if points.len() < 3 {
        return domain("need at least three (τ, η) points");
    }
    let mut taus: Vec<f64> = points.iter().map(|p| p.0).collect();
    taus.sort_by(f64::total_cmp);
    if taus.windows(2).any(|w| w[0] == w[1]) {
        return domain("storage times must be distinct");
    }
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return domain("efficiencies must be positive");
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = fit_exp_decay(&x, &y, 3)?;
    Ok(T2StarFit {
        eta0: fit.amplitude,
        t2star_us: fit.time_constant(4.0),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{carve_comb, FreqGrid};

    #[test]
    fn atoms_without_dephasing_stay_in_phase() {
        let e = AtomEnsemble::normalized(vec![0.0; 5], vec![1.0; 5]).unwrap();
        let tr = echo_from_atoms(&e, &[0.0, 0.3, 7.1]).unwrap();
        assert!(tr.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn atoms_rephase_at_multiples_of_period() {
        let delta = 1.0 / 1.5;
        let e = AtomEnsemble::uniform_comb(delta, 10).unwrap();
        let tr = echo_from_atoms(&e, &[1.5, 3.0, 0.75]).unwrap();
        assert!((tr[0] - 1.0).abs() < 1e-9);
        assert!((tr[1] - 1.0).abs() < 1e-9);
        assert!(tr[2] < 0.01);
        assert!(echo_from_atoms(&e, &[]).unwrap().is_empty());
        assert!(AtomEnsemble::new(vec![], vec![]).is_err());
        assert!(AtomEnsemble::new(vec![0.0], vec![0.5]).is_err());
    }

    #[test]
    fn transparent_medium_is_identity() {
        let input = storage_input(5.0, 200.0).unwrap();
        let p = AbsorptionProfile::flat(FreqGrid::comb_default(), 0.0).unwrap();
        let out = propagate_pulse(&p, &input).unwrap();
        let peak = input.amplitude.iter().map(|a| a.norm()).fold(0.0, f64::max);
        for (a, b) in out.amplitude.iter().zip(&input.amplitude) {
            assert!((a - b).norm() <= 1e-6 * peak);
        }
    }

    #[test]
    fn comb_echo_appears_at_storage_time() {
        let input = storage_input(5.0, 200.0).unwrap();
        let comb = CombSpec::for_storage_time(1.5, 3.0, 0.0, 16.0);
        let base = AbsorptionProfile::flat(FreqGrid::comb_default(), 0.0).unwrap();
        let p = carve_comb(&base, &comb).unwrap();
        let out = propagate_pulse(&p, &input).unwrap();
        let t = out.argmax_in(5.6, 9.0).unwrap();
        assert!((t - 6.5).abs() <= TRACE_DT_US + 1e-9, "{t}");
        assert!(out.energy() <= input.energy());
    }

    #[test]
    fn narrow_input_spectrum_is_required() {
        let input = FieldTrace::gaussian(0.0, 0.001, 4096, 2.0, 2.0).unwrap();
        let p = AbsorptionProfile::flat(FreqGrid::comb_default(), 0.0).unwrap();
        assert!(matches!(propagate_pulse(&p, &input), Err(Error::Grid(_))));
    }

    #[test]
    fn efficiency_definitions() {
        let reference = storage_input(5.0, 200.0).unwrap();
        let w = EchoWindows {
            pit_transmission: 1.0,
            ..EchoWindows::new(5.0, 1.5)
        };
        let same = reference.shifted(1.5);
        assert!((internal_efficiency(&same, &reference, &w).unwrap() - 1.0).abs() < 1e-12);

        let echo = reference.scaled(0.17_f64.sqrt()).shifted(1.5);
        let w85 = EchoWindows::new(5.0, 1.5);
        let eta = internal_efficiency(&echo, &reference, &w85).unwrap();
        assert!((eta - 0.17 * 0.85).abs() < 1e-9, "{eta}");

        let short = EchoWindows::new(5.0, 0.3);
        assert!(internal_efficiency(&echo, &reference, &short).is_err());
        let bad = EchoWindows {
            pit_transmission: 0.0,
            ..w85
        };
        assert!(internal_efficiency(&echo, &reference, &bad).is_err());

        let twice = reference.scaled(2.0_f64.sqrt());
        let avg = internal_efficiency_averaged(&echo, &[&reference, &twice], &w85).unwrap();
        assert!((avg - 0.17 * 0.85 / 1.5).abs() < 1e-9);
    }

    #[test]
    fn total_efficiency_is_product() {
        assert!((total_efficiency(0.2, 0.4).unwrap() - 0.08).abs() < 1e-15);
        assert_eq!(total_efficiency(0.0, 0.4).unwrap(), 0.0);
        assert_eq!(total_efficiency(0.3, 1.0).unwrap(), 0.3);
        assert!(total_efficiency(1.2, 0.4).is_err());
    }

    #[test]
    fn t2star_round_trip() {
        let pts: Vec<(f64, f64)> = [1.5, 2.5, 3.5, 4.5, 5.5]
            .iter()
            .map(|&t: &f64| (t, 0.1 * (-4.0 * t / 8.0).exp()))
            .collect();
        let f = fit_effective_t2star(&pts).unwrap();
        assert!((f.t2star_us.value - 8.0).abs() < 0.08);
        assert!((f.eta0 - 0.1).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = [1.5, 2.5, 3.5].iter().map(|&t| (t, 0.05)).collect();
        assert!(fit_effective_t2star(&flat).unwrap().t2star_us.unbounded);
        assert!(fit_effective_t2star(&[(1.0, 0.1), (2.0, 0.0), (3.0, 0.1)]).is_err());
        assert!(fit_effective_t2star(&[(1.0, 0.1), (1.0, 0.1), (3.0, 0.1)]).is_err());
    }

    #[test]
    fn trace_csv_round_trip() {
        let t = FieldTrace::gaussian(0.0, 0.01, 100, 0.5, 100.0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = FieldTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 100);
        assert!((back.amplitude[50] - t.amplitude[50]).norm() < 1e-8);
    }
}
