//! Coincidence histograms and photon-correlation estimators on time-tag
//! streams. Histogram axes are in ns; Poissonian errors throughout.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fit::fit_line;
use crate::memory::WindowIntegral;
use crate::timetag::TimeTagStream;

pub const DEFAULT_WINDOW_NS: f64 = 400.0;
/// Guard band between the coincidence window and the accidental region, in
/// units of the window.
pub const GUARD_WINDOWS: f64 = 2.0;
/// Minimum guard for unconditional autocorrelations, ns.
pub const AUTOCORR_MIN_GUARD_NS: f64 = 1000.0;
pub const AUTOCORR_HALF_RANGE_NS: f64 = 20_000.0;
pub const AFC_BIN_NS: f64 = 10.0;
/// Number of reference bins in the heralded autocorrelation.
pub const HERALD_REFERENCE_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ns: f64,
    pub range_ns: (f64, f64),
    pub counts: Vec<u64>,
    pub n_starts: usize,
    pub n_stops: usize,
}

impl CoincidenceHistogram {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.range_ns.0 + (i as f64 + 0.5) * self.bin_width_ns
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fractional counts over `[lo, hi]`, weighting partially covered bins
    /// by their overlap.
    pub fn integrate(&self, lo_ns: f64, hi_ns: f64) -> f64 {
        self.weighted(lo_ns, hi_ns)
            .map(|(i, w)| w * self.counts[i] as f64)
            .sum()
    }

    /// Width of `[lo, hi]` that lies inside the histogram range.
    pub fn covered_width(&self, lo_ns: f64, hi_ns: f64) -> f64 {
        (hi_ns.min(self.range_ns.1) - lo_ns.max(self.range_ns.0)).max(0.0)
    }

    fn weighted(&self, lo_ns: f64, hi_ns: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let b = self.bin_width_ns;
        let (r0, _) = self.range_ns;
        let first = (((lo_ns - r0) / b).floor().max(0.0) as usize).min(self.len());
        let last = (((hi_ns - r0) / b).ceil().max(0.0) as usize).min(self.len());
        (first..last).filter_map(move |i| {
            let a = r0 + i as f64 * b;
            let w = ((hi_ns.min(a + b) - lo_ns.max(a)) / b).clamp(0.0, 1.0);
            (w > 1e-9).then_some((i, w))
        })
    }

    pub fn argmax_center(&self) -> Option<f64> {
        let (i, _) = self
            .counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        Some(self.bin_center(i))
    }

    /// CSV with columns `bin_center_ns,counts`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_center_ns", "counts"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([format!("{}", self.bin_center(i)), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Adds another histogram with identical binning.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.bin_width_ns != other.bin_width_ns || self.range_ns != other.range_ns {
            return Err(Error::Inconsistent(
                "histograms have different binning".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_starts += other.n_starts;
        self.n_stops += other.n_stops;
        Ok(())
    }
}

impl WindowIntegral for CoincidenceHistogram {
    fn window_integral(&self, center_us: f64, width_us: f64) -> Result<f64> {
        let (c, w) = (center_us * 1e3, width_us * 1e3);
        if c - 0.5 * w < self.range_ns.0 - 1e-9 || c + 0.5 * w > self.range_ns.1 + 1e-9 {
            return Err(Error::Inconsistent(
                "window lies outside the histogram range".into(),
            ));
        }
        Ok(self.integrate(c - 0.5 * w, c + 0.5 * w))
    }
}

fn to_ps(ns: f64) -> i64 {
    (ns * 1e3).round() as i64
}

/// Start-stop histogram of `stop - start` over `[t_min, t_max)` ns, built
/// with a single linear merge over both streams.
pub fn coincidence_histogram(
    start: &TimeTagStream,
    stop: &TimeTagStream,
    bin_ns: f64,
    range_ns: (f64, f64),
) -> Result<CoincidenceHistogram> {
    let (t_min, t_max) = range_ns;
    if !(bin_ns > 0.0) || !(t_max > t_min) {
        return domain("histogram needs a positive bin and t_max > t_min");
    }
    let bins = (t_max - t_min) / bin_ns;
    let n = bins.round();
    if (bins - n).abs() > 1e-6 * n.max(1.0) || n < 1.0 {
        return Err(Error::Inconsistent(format!(
            "bins of {bin_ns} ns do not tile [{t_min}, {t_max}] exactly"
        )));
    }
    let bin_ps = bin_ns * 1e3;
    let lo_ps = to_ps(t_min);
    let hi_ps = to_ps(t_max);
    for s in [start, stop] {
        if s.timestamps().windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Unsorted(format!("channel {}", s.channel())));
        }
    }
    let mut counts = vec![0u64; n as usize];
    let stops = stop.timestamps();
    let mut first = 0usize;
    for &s in start.timestamps() {
        let s = s as i64;
        while first < stops.len() && (stops[first] as i64) - s < lo_ps {
            first += 1;
        }
        let mut j = first;
        while j < stops.len() {
            let d = stops[j] as i64 - s;
            if d >= hi_ps {
                break;
            }
            let k = (((d - lo_ps) as f64) / bin_ps).floor() as usize;
            let last = counts.len() - 1;
            counts[k.min(last)] += 1;
            j += 1;
        }
    }
    Ok(CoincidenceHistogram {
        bin_width_ns: bin_ns,
        range_ns,
        counts,
        n_starts: start.len(),
        n_stops: stop.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub g2: f64,
    pub sigma: f64,
    pub window_ns: f64,
    pub window_center_ns: f64,
    pub signal_counts: f64,
    /// Accidental coincidences scaled to the window width.
    pub accidental_estimate: f64,
    pub accidental_counts: f64,
    pub accidental_region_ns: Vec<(f64, f64)>,
}

impl CorrelationResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Accidental region outside `|t - c| < W/2 + 2W`, clipped to the range.
pub fn default_accidental_region(
    hist: &CoincidenceHistogram,
    center_ns: f64,
    window_ns: f64,
) -> Vec<(f64, f64)> {
    side_regions(hist, center_ns, 0.5 * window_ns + GUARD_WINDOWS * window_ns)
}

fn side_regions(hist: &CoincidenceHistogram, center_ns: f64, exclusion_ns: f64) -> Vec<(f64, f64)> {
    let (r0, r1) = hist.range_ns;
    let mut out = Vec::new();
    if center_ns - exclusion_ns > r0 {
        out.push((r0, center_ns - exclusion_ns));
    }
    if center_ns + exclusion_ns < r1 {
        out.push((center_ns + exclusion_ns, r1));
    }
    out
}

/// Windowed cross-correlation: counts in `W` around `center` over the
/// accidental level scaled to `W`. The centre defaults to the histogram
/// peak and the region to [`default_accidental_region`].
pub fn g2_cross(
    hist: &CoincidenceHistogram,
    window_ns: f64,
    center_ns: Option<f64>,
    accidental_region: Option<&[(f64, f64)]>,
) -> Result<CorrelationResult> {
    if !(window_ns > 0.0) {
        return domain("window must be positive");
    }
    let center = match center_ns {
        Some(c) => c,
        None => hist
            .argmax_center()
            .ok_or_else(|| Error::Inconsistent("histogram has no bins".into()))?,
    };
    let (w_lo, w_hi) = (center - 0.5 * window_ns, center + 0.5 * window_ns);
    if w_lo < hist.range_ns.0 - 1e-9 || w_hi > hist.range_ns.1 + 1e-9 {
        return Err(Error::Inconsistent(
            "coincidence window lies outside the histogram".into(),
        ));
    }
    let region: Vec<(f64, f64)> = match accidental_region {
        Some(r) => r.to_vec(),
        None => default_accidental_region(hist, center, window_ns),
    };
    for &(a, b) in &region {
        if !(b > a) {
            return Err(Error::Inconsistent(format!(
                "empty accidental interval ({a}, {b})"
            )));
        }
        if a < hist.range_ns.0 - 1e-9 || b > hist.range_ns.1 + 1e-9 {
            return Err(Error::Inconsistent(
                "accidental region lies outside the histogram".into(),
            ));
        }
        if a < w_hi - 1e-9 && b > w_lo + 1e-9 {
            return Err(Error::Inconsistent(
                "accidental region overlaps the coincidence window".into(),
            ));
        }
    }
    ratio_from_regions(hist, window_ns, center, region)
}

fn ratio_from_regions(
    hist: &CoincidenceHistogram,
    window_ns: f64,
    center: f64,
    region: Vec<(f64, f64)>,
) -> Result<CorrelationResult> {
    let width: f64 = region.iter().map(|&(a, b)| hist.covered_width(a, b)).sum();
    if width <= 0.0 {
        return Err(Error::Inconsistent("accidental region is empty".into()));
    }
    let n_acc: f64 = region.iter().map(|&(a, b)| hist.integrate(a, b)).sum();
    if n_acc <= 0.0 {
        return Err(Error::Fit(
            "no accidental coincidences to normalise against".into(),
        ));
    }
    let n_w = hist.integrate(center - 0.5 * window_ns, center + 0.5 * window_ns);
    let acc = n_acc * window_ns / width;
    let g2 = n_w / acc;
    let sigma = if n_w > 0.0 {
        g2 * (1.0 / n_w + 1.0 / n_acc).sqrt()
    } else {
        1.0 / acc
    };
    Ok(CorrelationResult {
        g2,
        sigma,
        window_ns,
        window_center_ns: center,
        signal_counts: n_w,
        accidental_estimate: acc,
        accidental_counts: n_acc,
        accidental_region_ns: region,
    })
}

/// Zero-delay correlation of two detectors behind a beam splitter. Uses
/// bins equal to the window over at least ±20 µs; accidentals lie beyond
/// `W/2 + max(2W, 1 µs)`.
pub fn unconditional_autocorrelation(
    a: &TimeTagStream,
    b: &TimeTagStream,
    window_ns: f64,
) -> Result<CorrelationResult> {
    if !(window_ns > 0.0) {
        return domain("window must be positive");
    }
    let k = (AUTOCORR_HALF_RANGE_NS / window_ns).ceil();
    let half = 0.5 * window_ns + k * window_ns;
    let hist = coincidence_histogram(a, b, window_ns, (-half, half))?;
    let guard = 0.5 * window_ns + (GUARD_WINDOWS * window_ns).max(AUTOCORR_MIN_GUARD_NS);
    let region = side_regions(&hist, 0.0, guard);
    g2_cross(&hist, window_ns, Some(0.0), Some(&region))
}

/// Cross-correlation of the echo at `τ`. Accidentals are taken over
/// `(τ + W/2, τ + t_off]` where the gated pump leaves only stored noise.
pub fn afc_g2(
    idler: &TimeTagStream,
    signal: &TimeTagStream,
    tau_us: f64,
    t_p_off_us: f64,
    window_ns: f64,
) -> Result<CorrelationResult> {
    if tau_us < crate::source::MIN_STORAGE_US - 1e-12 {
        return domain(format!(
            "storage time must be at least {} µs",
            crate::source::MIN_STORAGE_US
        ));
    }
    if !(window_ns > 0.0) || !(t_p_off_us > 0.0) {
        return domain("window and pump-off delay must be positive");
    }
    let tau_ns = tau_us * 1e3;
    let lo = AFC_BIN_NS * ((tau_ns - 0.5 * window_ns) / AFC_BIN_NS).floor();
    let hi = AFC_BIN_NS * ((tau_ns + t_p_off_us * 1e3) / AFC_BIN_NS).ceil();
    let acc = (tau_ns + 0.5 * window_ns, tau_ns + t_p_off_us * 1e3);
    if acc.1 - acc.0 < AFC_BIN_NS {
        return Err(Error::Inconsistent(format!(
            "accidental region ({:.0}, {:.0}] ns is shorter than one {AFC_BIN_NS} ns bin",
            acc.0, acc.1
        )));
    }
    let hist = coincidence_histogram(idler, signal, AFC_BIN_NS, (lo, hi))?;
    g2_cross(&hist, window_ns, Some(tau_ns), Some(&[acc]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}

impl From<&CorrelationResult> for Measured {
    fn from(r: &CorrelationResult) -> Self {
        Self::new(r.g2, r.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CSResult {
    pub r_value: f64,
    /// Propagated error treating the two cross-correlation factors as
    /// independent measurements.
    pub sigma_r: f64,
    /// First-order error with `g_si²` fully correlated.
    pub sigma_r_correlated: f64,
    pub g2_si: Measured,
    pub g2_ss: Measured,
    pub g2_ii: Measured,
    pub assumed_gss_flag: bool,
}

impl CSResult {
    /// `(R - 1)/σ_R`.
    pub fn significance(&self) -> f64 {
        (self.r_value - 1.0) / self.sigma_r
    }
}

/// Value assumed for the signal autocorrelation when it is not measured.
pub const ASSUMED_GSS: f64 = 2.0;

/// `R = g_si² / (g_ss·g_ii)`.
pub fn cs_parameter(g_si: Measured, g_ss: Option<Measured>, g_ii: Measured) -> Result<CSResult> {
    let assumed = g_ss.is_none();
    let g_ss = g_ss.unwrap_or(Measured::new(ASSUMED_GSS, 0.0));
    for m in [g_si, g_ss, g_ii] {
        if !(m.value >= 0.0) || !(m.sigma >= 0.0) {
            return domain("correlations and errors must be non-negative");
        }
    }
    let den = g_ss.value * g_ii.value;
    if den == 0.0 {
        return Err(Error::Domain(
            "zero autocorrelation in the denominator".into(),
        ));
    }
    let r = g_si.value * g_si.value / den;
    let rel_si = if g_si.value > 0.0 {
        g_si.sigma / g_si.value
    } else {
        0.0
    };
    let rel_rest = (g_ss.sigma / g_ss.value).powi(2) + (g_ii.sigma / g_ii.value).powi(2);
    Ok(CSResult {
        r_value: r,
        sigma_r: r * (2.0 * rel_si * rel_si + rel_rest).sqrt(),
        sigma_r_correlated: r * (4.0 * rel_si * rel_si + rel_rest).sqrt(),
        g2_si: g_si,
        g2_ss: g_ss,
        g2_ii: g_ii,
        assumed_gss_flag: assumed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldedAutocorrelation {
    /// Bin `k` counts pairs of an arm-a click heralded by idler `j` and an
    /// arm-b click heralded by idler `j + k`.
    pub bins: Vec<u64>,
    pub g2: f64,
    pub sigma: f64,
    pub window_ns: f64,
    pub heralds: usize,
}

/// Signal clicks of one arm inside each herald's window, via a two-pointer
/// sweep.
fn clicks_per_herald(heralds: &[u64], clicks: &[u64], lo_ps: i64, hi_ps: i64) -> Vec<u64> {
    let mut out = Vec::with_capacity(heralds.len());
    let (mut first, mut end) = (0usize, 0usize);
    for &h in heralds {
        let h = h as i64;
        while first < clicks.len() && (clicks[first] as i64) - h < lo_ps {
            first += 1;
        }
        end = end.max(first);
        while end < clicks.len() && (clicks[end] as i64) - h <= hi_ps {
            end += 1;
        }
        out.push((end - first) as u64);
    }
    out
}

/// Heralded autocorrelation of the signal split onto two detectors. Bin 0
/// holds twofold signal events heralded by the same idler; bins `k ≥ 1`
/// pair clicks heralded by idlers `k` apart and serve as the uncorrelated
/// reference.
pub fn heralded_autocorrelation(
    idler: &TimeTagStream,
    signal_a: &TimeTagStream,
    signal_b: &TimeTagStream,
    window_ns: f64,
) -> Result<HeraldedAutocorrelation> {
    if !(window_ns > 0.0) {
        return domain("window must be positive");
    }
    for s in [idler, signal_a, signal_b] {
        if s.timestamps().windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Unsorted(format!("channel {}", s.channel())));
        }
    }
    let half = to_ps(0.5 * window_ns);
    let h = idler.timestamps();
    let a = clicks_per_herald(h, signal_a.timestamps(), -half, half);
    let b = clicks_per_herald(h, signal_b.timestamps(), -half, half);
    let mut bins = vec![0u64; HERALD_REFERENCE_BINS + 1];
    for (k, bin) in bins.iter_mut().enumerate() {
        *bin = a.iter().zip(b.iter().skip(k)).map(|(x, y)| x * y).sum();
    }
    let reference = &bins[1..];
    if reference.iter().filter(|c| **c > 0).count() < 2 {
        return Err(Error::Fit("fewer than two populated reference bins".into()));
    }
    let total_ref: u64 = reference.iter().sum();
    let mean_ref = total_ref as f64 / reference.len() as f64;
    let n0 = bins[0] as f64;
    let g2 = n0 / mean_ref;
    let sigma = if n0 > 0.0 {
        g2 * (1.0 / n0 + 1.0 / total_ref as f64).sqrt()
    } else {
        1.0 / mean_ref
    };
    Ok(HeraldedAutocorrelation {
        bins,
        g2,
        sigma,
        window_ns,
        heralds: h.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideDecays {
    /// Decay rate of the positive-delay side, 1/ns.
    pub rate_pos: f64,
    pub rate_neg: f64,
}

impl SideDecays {
    /// Linewidths `rate/(2π)` in MHz.
    pub fn linewidths_mhz(&self) -> (f64, f64) {
        let k = 1e3 / (2.0 * std::f64::consts::PI);
        (self.rate_pos * k, self.rate_neg * k)
    }
}

/// Poisson-weighted log-linear fits of both sides of a coincidence peak
/// at `center`, after subtracting `background` counts per bin. Bins up to
/// `extent_ns` from the centre are used.
pub fn fit_side_decays(
    hist: &CoincidenceHistogram,
    center_ns: f64,
    background: f64,
    extent_ns: f64,
) -> Result<SideDecays> {
    let side = |sign: f64| -> Result<f64> {
        let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for (i, &c) in hist.counts.iter().enumerate() {
            let d = sign * (hist.bin_center(i) - center_ns);
            let net = c as f64 - background;
            if d > 0.0 && d <= extent_ns && net > 0.0 {
                x.push(d);
                y.push(net.ln());
                w.push(net * net / c as f64);
            }
        }
        if x.len() < 3 {
            return Err(Error::Fit(
                "too few populated bins on one side of the peak".into(),
            ));
        }
        Ok(-fit_line(&x, &y, Some(&w))?.slope)
    };
    Ok(SideDecays {
        rate_pos: side(1.0)?,
        rate_neg: side(-1.0)?,
    })
}
