//! Absorption profiles of the doped crystal and the spectral features
//! burnt into them: inhomogeneous line, transparency pit, frequency comb.
//!
//! Frequencies are in MHz relative to line centre. Optical depth is the
//! through-crystal value, so single-pass intensity transmission is
//! `exp(-OD)`.

use std::f64::consts::{LN_2, PI};
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{domain, Error, Result};

/// Uniform, strictly increasing frequency axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqGrid {
    pub start_mhz: f64,
    pub step_mhz: f64,
    pub len: usize,
}

impl FreqGrid {
    pub fn new(start_mhz: f64, step_mhz: f64, len: usize) -> Result<Self> {
        if !(step_mhz > 0.0) || !start_mhz.is_finite() || len < 2 {
            return Err(Error::Grid(format!(
                "grid needs a positive step and at least two points (step {step_mhz}, len {len})"
            )));
        }
        Ok(Self {
            start_mhz,
            step_mhz,
            len,
        })
    }

    /// Grid `[-half_span, half_span]` with the given step; zero is a grid point.
    pub fn centered(half_span_mhz: f64, step_mhz: f64) -> Result<Self> {
        if !(half_span_mhz > 0.0 && step_mhz > 0.0) {
            return Err(Error::Grid("span and step must be positive".into()));
        }
        let half = (half_span_mhz / step_mhz).round() as usize;
        Self::new(-(half as f64) * step_mhz, step_mhz, 2 * half + 1)
    }

    /// ±40 MHz at 10 kHz, for pit and comb work.
    pub fn comb_default() -> Self {
        Self::centered(40.0, 0.01).expect("static grid")
    }

    /// ±15 GHz at 10 MHz, for the full inhomogeneous line.
    pub fn line_default() -> Self {
        Self::centered(15_000.0, 10.0).expect("static grid")
    }

    pub fn freq(&self, i: usize) -> f64 {
        self.start_mhz + self.step_mhz * i as f64
    }

    pub fn end_mhz(&self) -> f64 {
        self.freq(self.len - 1)
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        let eps = 1e-9 * self.step_mhz;
        lo >= self.start_mhz - eps && hi <= self.end_mhz() + eps
    }

    /// Index of the grid point nearest to `f`, clamped to the grid.
    pub fn nearest(&self, f: f64) -> usize {
        let x = ((f - self.start_mhz) / self.step_mhz).round();
        x.clamp(0.0, (self.len - 1) as f64) as usize
    }

    pub fn freqs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.freq(i))
    }
}

/// Optical depth sampled on a [`FreqGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionProfile {
    grid: FreqGrid,
    od: Vec<f64>,
}

impl AbsorptionProfile {
    pub fn new(grid: FreqGrid, od: Vec<f64>) -> Result<Self> {
        if od.len() != grid.len {
            return Err(Error::Grid(format!(
                "{} OD samples for a grid of {}",
                od.len(),
                grid.len
            )));
        }
        if od.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return domain("optical depth must be finite and non-negative");
        }
        Ok(Self { grid, od })
    }

    pub fn flat(grid: FreqGrid, od: f64) -> Result<Self> {
        Self::new(grid, vec![od; grid.len])
    }

    pub fn grid(&self) -> &FreqGrid {
        &self.grid
    }

    pub fn od(&self) -> &[f64] {
        &self.od
    }

    /// Linear interpolation, clamped to the edge values outside the grid.
    pub fn od_at(&self, f: f64) -> f64 {
        let x = (f - self.grid.start_mhz) / self.grid.step_mhz;
        if x <= 0.0 {
            return self.od[0];
        }
        let last = self.grid.len - 1;
        if x >= last as f64 {
            return self.od[last];
        }
        let i = x.floor() as usize;
        let frac = x - i as f64;
        self.od[i] * (1.0 - frac) + self.od[i + 1] * frac
    }

    /// Scales every OD value by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) {
            return domain("OD scale factor must be non-negative");
        }
        Self::new(self.grid, self.od.iter().map(|v| v * factor).collect())
    }

    /// Two-column CSV `freq_mhz,od`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "freq_mhz,od")?;
        for (f, od) in self.grid.freqs().zip(&self.od) {
            writeln!(out, "{f:.6},{od:.9}")?;
        }
        Ok(())
    }

    /// Reads the format of [`write_csv`](Self::write_csv); the frequency
    /// column must be uniform.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut freqs = Vec::new();
        let mut od = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("freq")) {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Format(format!("line {}: missing column", n + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))
            };
            freqs.push(parse(parts.next())?);
            od.push(parse(parts.next())?);
        }
        if freqs.len() < 2 {
            return Err(Error::Format("profile needs at least two rows".into()));
        }
        let step = (freqs[freqs.len() - 1] - freqs[0]) / (freqs.len() - 1) as f64;
        let uniform = freqs.iter().enumerate().all(|(i, f)| {
            (f - (freqs[0] + step * i as f64)).abs() <= 1e-6 * step.abs().max(1e-9) + 1e-6
        });
        if !uniform || !(step > 0.0) {
            return Err(Error::Grid(
                "frequency column is not uniform and increasing".into(),
            ));
        }
        Self::new(FreqGrid::new(freqs[0], step, freqs.len())?, od)
    }
}

/// A real-valued curve on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub grid: FreqGrid,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn peak(&self) -> (f64, f64) {
        let (i, v) = self
            .values
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        (self.grid.freq(i), v)
    }

    /// Full width at half maximum around the global peak, by linear
    /// interpolation of the half-level crossings. `None` when a crossing
    /// falls outside the grid.
    pub fn fwhm(&self) -> Option<f64> {
        let (ip, vmax) =
            self.values
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
        let half = vmax / 2.0;
        let v = &self.values;
        let mut left = None;
        for i in (0..ip).rev() {
            if v[i] <= half {
                let frac = (half - v[i]) / (v[i + 1] - v[i]);
                left = Some(self.grid.freq(i) + frac * self.grid.step_mhz);
                break;
            }
        }
        let mut right = None;
        for i in ip + 1..v.len() {
            if v[i] <= half {
                let frac = (v[i - 1] - half) / (v[i - 1] - v[i]);
                right = Some(self.grid.freq(i - 1) + frac * self.grid.step_mhz);
                break;
            }
        }
        Some(right? - left?)
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step_mhz)
    }
}

pub(crate) fn trapezoid(v: &[f64], step: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    step * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
}

/// Hole-burnt transparency window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitSpec {
    pub center_mhz: f64,
    pub width_mhz: f64,
    pub residual_od: f64,
}

impl Default for PitSpec {
    fn default() -> Self {
        Self {
            center_mhz: 0.0,
            width_mhz: 16.0,
            residual_od: -(0.85_f64.ln()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ToothShape {
    #[default]
    Gaussian,
    Square,
}

/// Atomic frequency comb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombSpec {
    pub periodicity_mhz: f64,
    pub tooth_fwhm_mhz: f64,
    pub peak_od: f64,
    pub background_od: f64,
    pub span_mhz: f64,
    #[serde(default)]
    pub tooth_shape: ToothShape,
    #[serde(default)]
    pub center_mhz: f64,
}

impl CombSpec {
    /// Comb for storage time `tau_us` with finesse 4 and Gaussian teeth.
    pub fn for_storage_time(tau_us: f64, peak_od: f64, background_od: f64, span_mhz: f64) -> Self {
        let periodicity_mhz = 1.0 / tau_us;
        Self {
            periodicity_mhz,
            tooth_fwhm_mhz: periodicity_mhz / 4.0,
            peak_od,
            background_od,
            span_mhz,
            tooth_shape: ToothShape::Gaussian,
            center_mhz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_teeth()?;
        if self.span_mhz < 3.0 * self.periodicity_mhz {
            return domain("comb span must cover at least three periods");
        }
        Ok(())
    }

    /// Checks everything except the minimum span; a comb narrower than one
    /// period reduces to a single tooth.
    pub fn validate_teeth(&self) -> Result<()> {
        if !(self.periodicity_mhz > 0.0 && self.tooth_fwhm_mhz > 0.0 && self.span_mhz >= 0.0) {
            return domain("comb periodicity and tooth width must be positive");
        }
        if self.tooth_fwhm_mhz >= self.periodicity_mhz {
            return domain(format!(
                "tooth width {} MHz must be below the periodicity {} MHz",
                self.tooth_fwhm_mhz, self.periodicity_mhz
            ));
        }
        if !(self.peak_od > self.background_od && self.background_od >= 0.0) {
            return domain("comb needs peak OD above a non-negative background");
        }
        Ok(())
    }

    /// Storage time `1/Δ`, µs.
    pub fn storage_time_us(&self) -> f64 {
        1.0 / self.periodicity_mhz
    }

    pub fn tooth_count(&self) -> usize {
        (self.span_mhz / self.periodicity_mhz + 1e-9).floor() as usize + 1
    }

    fn first_tooth(&self) -> f64 {
        self.center_mhz - 0.5 * (self.tooth_count() - 1) as f64 * self.periodicity_mhz
    }

    /// Tooth frequencies, symmetric about the comb centre.
    pub fn tooth_frequencies(&self) -> Vec<f64> {
        let first = self.first_tooth();
        (0..self.tooth_count())
            .map(|k| first + k as f64 * self.periodicity_mhz)
            .collect()
    }

    /// Half-width of the region rewritten by the comb: half a period
    /// beyond the outermost teeth.
    pub fn support_half_width(&self) -> f64 {
        0.5 * self.tooth_count() as f64 * self.periodicity_mhz
    }

    /// Normalised tooth pattern in `[0, 1]` at frequency `f`; zero outside
    /// the support.
    pub fn envelope(&self, f: f64) -> f64 {
        if (f - self.center_mhz).abs() > self.support_half_width() {
            return 0.0;
        }
        let first = self.first_tooth();
        let last = self.tooth_count() as i64 - 1;
        let k0 = ((f - first) / self.periodicity_mhz).round() as i64;
        let mut s = 0.0;
        for k in (k0 - 3).max(0)..=(k0 + 3).min(last) {
            let x = f - (first + k as f64 * self.periodicity_mhz);
            s += match self.tooth_shape {
                ToothShape::Gaussian => {
                    (-4.0 * LN_2 * x * x / (self.tooth_fwhm_mhz * self.tooth_fwhm_mhz)).exp()
                }
                ToothShape::Square => {
                    if x.abs() <= 0.5 * self.tooth_fwhm_mhz {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        s.min(1.0)
    }
}

/// Gaussian inhomogeneous line centred at zero.
pub fn inhomogeneous_profile(
    fwhm_ghz: f64,
    peak_od: f64,
    grid: FreqGrid,
) -> Result<AbsorptionProfile> {
    if !(fwhm_ghz > 0.0 && peak_od > 0.0) {
        return domain("line width and peak OD must be positive");
    }
    let fwhm = fwhm_ghz * 1e3;
    if !grid.covers(-fwhm, fwhm) {
        return Err(Error::Grid(format!(
            "grid [{}, {}] MHz does not cover ±FWHM = ±{fwhm} MHz",
            grid.start_mhz,
            grid.end_mhz()
        )));
    }
    let od = grid
        .freqs()
        .map(|f| peak_od * (-4.0 * LN_2 * f * f / (fwhm * fwhm)).exp())
        .collect();
    AbsorptionProfile::new(grid, od)
}

/// Burns a pit: OD is set to `residual_od` inside the window, joined to the
/// surrounding profile by raised-cosine edges 5% of the pit width wide.
pub fn carve_pit(profile: &AbsorptionProfile, pit: &PitSpec) -> Result<AbsorptionProfile> {
    if !(pit.width_mhz > 0.0) || !(pit.residual_od >= 0.0) {
        return domain("pit width must be positive and residual OD non-negative");
    }
    let half = 0.5 * pit.width_mhz;
    let grid = *profile.grid();
    if !grid.covers(pit.center_mhz - half, pit.center_mhz + half) {
        return Err(Error::Grid("pit exceeds the profile grid".into()));
    }
    let edge = 0.05 * pit.width_mhz;
    let od = grid
        .freqs()
        .zip(profile.od())
        .map(|(f, &orig)| {
            let d = (f - pit.center_mhz).abs();
            if d > half {
                orig
            } else if d <= half - edge {
                pit.residual_od
            } else {
                let u = (half - d) / edge;
                let s = 0.5 * (1.0 - (PI * u).cos());
                s * pit.residual_od + (1.0 - s) * orig
            }
        })
        .collect();
    AbsorptionProfile::new(grid, od)
}

/// Writes a comb into the profile: inside the comb support the OD becomes
/// `background + (peak - background) * envelope`.
pub fn carve_comb(profile: &AbsorptionProfile, comb: &CombSpec) -> Result<AbsorptionProfile> {
    comb.validate()?;
    let grid = *profile.grid();
    let hw = comb.support_half_width();
    if !grid.covers(comb.center_mhz - hw, comb.center_mhz + hw) {
        return Err(Error::Grid("comb span exceeds the profile grid".into()));
    }
    let od = grid
        .freqs()
        .zip(profile.od())
        .map(|(f, &orig)| {
            if (f - comb.center_mhz).abs() > hw {
                orig
            } else {
                comb.background_od + (comb.peak_od - comb.background_od) * comb.envelope(f)
            }
        })
        .collect();
    AbsorptionProfile::new(grid, od)
}

/// Single-pass intensity transmission `exp(-OD)`.
pub fn transmission(profile: &AbsorptionProfile) -> Spectrum {
    Spectrum {
        grid: *profile.grid(),
        values: profile.od().iter().map(|od| (-od).exp()).collect(),
    }
}

/// Unit-area Lorentzian of full width `fwhm`.
pub fn lorentzian(f: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    g / (PI * (f * f + g * g))
}

/// Coincidence rate of a Lorentzian photon (centred at zero) behind the
/// pit, as the pit is tuned: `R(c) = ∫ L(ν) T(ν - (c - c₀)) dν` where `c₀`
/// is the pit centre in `pit_profile` and `c` runs over its grid. Outside
/// the grid the transmission takes its edge value.
pub fn filtered_lineshape(
    lorentzian_fwhm_mhz: f64,
    pit_profile: &AbsorptionProfile,
    pit_center_mhz: f64,
) -> Result<Spectrum> {
    if !(lorentzian_fwhm_mhz > 0.0) {
        return domain("Lorentzian width must be positive");
    }
    let grid = *pit_profile.grid();
    let t = transmission(pit_profile).values;
    let l: Vec<f64> = grid
        .freqs()
        .map(|f| lorentzian(f, lorentzian_fwhm_mhz))
        .collect();
    let n = grid.len as i64;
    let j0 = grid.nearest(pit_center_mhz) as i64;
    let values = (0..n)
        .map(|j| {
            let shift = j - j0;
            let mut acc = 0.0;
            for (i, li) in l.iter().enumerate() {
                let k = (i as i64 - shift).clamp(0, n - 1) as usize;
                acc += li * t[k];
            }
            acc * grid.step_mhz
        })
        .collect();
    Ok(Spectrum { grid, values })
}

/// Limits for synthesising the comb-preparation pulse train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTrainOptions {
    /// Longest train the pulse generator can play, µs.
    pub max_duration_us: f64,
    /// Spectral samples per tooth FWHM.
    pub points_per_tooth: f64,
}

impl Default for PulseTrainOptions {
    fn default() -> Self {
        Self {
            max_duration_us: 500.0,
            points_per_tooth: 8.0,
        }
    }
}

/// Complex baseband amplitude of a preparation sequence, centred on t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pub dt_us: f64,
    pub samples: Vec<Complex64>,
    comb: CombSpec,
}

impl PulseTrain {
    pub fn duration_us(&self) -> f64 {
        self.dt_us * self.samples.len() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        (i as f64 - (self.samples.len() / 2) as f64) * self.dt_us
    }

    /// Power spectrum (normalised to unit maximum) on the baseband grid;
    /// the frequency axis is offset by the comb centre.
    pub fn power_spectrum(&self) -> Spectrum {
        let n = self.samples.len();
        let spec = dft::centered_forward(&self.samples);
        let mut values: Vec<f64> = spec.iter().map(|c| c.norm_sqr()).collect();
        let m = values.iter().cloned().fold(0.0, f64::max);
        if m > 0.0 {
            values.iter_mut().for_each(|v| *v /= m);
        }
        let df = 1.0 / (n as f64 * self.dt_us);
        Spectrum {
            grid: FreqGrid {
                start_mhz: self.comb.center_mhz - (n / 2) as f64 * df,
                step_mhz: df,
                len: n,
            },
            values,
        }
    }

    /// Normalised RMS deviation between the train's power spectrum and the
    /// comb envelope, evaluated over the comb support.
    pub fn envelope_nrmse(&self) -> f64 {
        let ps = self.power_spectrum();
        let hw = self.comb.support_half_width();
        let (mut se, mut count) = (0.0, 0usize);
        for (f, p) in ps.grid.freqs().zip(&ps.values) {
            if (f - self.comb.center_mhz).abs() <= hw {
                se += (p - self.comb.envelope(f)).powi(2);
                count += 1;
            }
        }
        (se / count.max(1) as f64).sqrt()
    }

    /// Local maxima of `|amplitude|` above `fraction` of the global maximum.
    pub fn pulse_times(&self, fraction: f64) -> Vec<f64> {
        let a: Vec<f64> = self.samples.iter().map(|c| c.norm()).collect();
        let m = a.iter().cloned().fold(0.0, f64::max);
        (1..a.len().saturating_sub(1))
            .filter(|&i| a[i] >= fraction * m && a[i] > a[i - 1] && a[i] >= a[i + 1])
            .map(|i| self.time(i))
            .collect()
    }
}

/// Synthesises a pulse sequence whose power spectrum is the comb envelope:
/// the spectral amplitude `sqrt(envelope)` with flat phase, transformed to
/// the time domain. The train repeats with period `1/Δ`. The minimum-span
/// rule is not enforced, so a single tooth can be synthesised.
pub fn preparation_pulse_train(comb: &CombSpec, opts: &PulseTrainOptions) -> Result<PulseTrain> {
    comb.validate_teeth()?;
    if !(opts.points_per_tooth >= 1.0 && opts.max_duration_us > 0.0) {
        return domain("pulse-train options must be positive");
    }
    let df = comb.tooth_fwhm_mhz / opts.points_per_tooth;
    let duration = 1.0 / df;
    if duration > opts.max_duration_us {
        return domain(format!(
            "resolving {} MHz teeth needs a {duration:.1} µs train, above the {} µs limit",
            comb.tooth_fwhm_mhz, opts.max_duration_us
        ));
    }
    let band = 2.0 * comb.support_half_width() + 4.0 * comb.periodicity_mhz;
    let mut n = (band / df).ceil() as usize;
    n += n % 2;
    let spec: Vec<Complex64> = (0..n)
        .map(|j| {
            let f = comb.center_mhz + (j as f64 - (n / 2) as f64) * df;
            Complex64::new(comb.envelope(f).sqrt(), 0.0)
        })
        .collect();
    let mut samples = dft::centered_inverse(&spec);
    let m = samples.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if m > 0.0 {
        samples.iter_mut().for_each(|c| *c /= m);
    }
    Ok(PulseTrain {
        dt_us: 1.0 / (n as f64 * df),
        samples,
        comb: *comb,
    })
}

/// Named hyperfine sublevels of the ground and excited manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sublevel {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[serde(rename = "5/2")]
    FiveHalves,
}

impl Sublevel {
    fn index(self) -> usize {
        match self {
            Sublevel::Half => 0,
            Sublevel::ThreeHalves => 1,
            Sublevel::FiveHalves => 2,
        }
    }
}

/// Level scheme with user-supplied splittings (MHz): `[1/2↔3/2, 3/2↔5/2]`
/// for each manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineScheme {
    pub ground_splittings_mhz: [f64; 2],
    pub excited_splittings_mhz: [f64; 2],
    pub transition: (Sublevel, Sublevel),
}

impl HyperfineScheme {
    pub fn new(
        ground: [f64; 2],
        excited: [f64; 2],
        transition: (Sublevel, Sublevel),
    ) -> Result<Self> {
        if ground.iter().chain(&excited).any(|s| !(*s > 0.0)) {
            return domain("hyperfine splittings must be strictly positive");
        }
        Ok(Self {
            ground_splittings_mhz: ground,
            excited_splittings_mhz: excited,
            transition,
        })
    }

    fn energy(splits: &[f64; 2], level: Sublevel) -> f64 {
        splits[..level.index()].iter().sum()
    }

    /// Frequency of `ground → excited` relative to the active transition.
    pub fn transition_offset_mhz(&self, ground: Sublevel, excited: Sublevel) -> f64 {
        let (g0, e0) = self.transition;
        (Self::energy(&self.excited_splittings_mhz, excited)
            - Self::energy(&self.excited_splittings_mhz, e0))
            - (Self::energy(&self.ground_splittings_mhz, ground)
                - Self::energy(&self.ground_splittings_mhz, g0))
    }
}
