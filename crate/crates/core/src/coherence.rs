//! Photon-echo and nutation probes of the optical coherence: two-pulse and
//! stimulated echoes, heterodyne beat detection, Rabi calibration.

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fit::{
    fit_exp_decay, fit_line, fit_through_origin, solve_dense, t_quantile, Estimate, LineFit,
};
use crate::waveguide::GaussianMode;

/// `Ω_R · t_π` for a dense, inhomogeneously broadened ensemble.
pub const NUTATION_PRODUCT: f64 = 5.1;
/// Heterodyne beat between probe and excitation, MHz.
pub const DEFAULT_BEAT_MHZ: f64 = 10.0;

/// Type I mode diameters (µm) measured at 606 nm on the nutation setup.
pub const TYPE_I_NUTATION_MODE: (f64, f64) = (4.5, 7.6);
/// Type II reference mode: the 15 µm track-separation waveguide.
pub const TYPE_II_REFERENCE_MODE: (f64, f64) = (7.2, 12.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EchoKind {
    Tpe,
    Spe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoSequence {
    pub kind: EchoKind,
    pub tau2_us: f64,
    pub tau1_us: f64,
}

impl EchoSequence {
    pub fn new(kind: EchoKind, tau2_us: f64, tau1_us: f64) -> Result<Self> {
        if !(tau2_us > 0.0) || !(tau1_us >= 0.0) {
            return domain("echo delays need τ₂ > 0 and τ₁ ≥ 0");
        }
        if kind == EchoKind::Tpe && tau1_us != 0.0 {
            return domain("a two-pulse echo has no τ₁");
        }
        Ok(Self {
            kind,
            tau2_us,
            tau1_us,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceParams {
    pub t2_us: f64,
    pub t1_us: f64,
    pub sd_rate_khz_per_us: f64,
    pub gamma0_khz: f64,
}

impl CoherenceParams {
    /// Parameters with `Γ₀` taken from `T₂`.
    pub fn new(t2_us: f64, t1_us: f64, sd_rate_khz_per_us: f64) -> Result<Self> {
        let p = Self {
            t2_us,
            t1_us,
            sd_rate_khz_per_us,
            gamma0_khz: gamma_hom(t2_us)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t2_us > 0.0 && self.t1_us > 0.0) {
            return domain("T₁ and T₂ must be positive");
        }
        if self.t2_us > 2.0 * self.t1_us {
            return domain(format!(
                "T₂ = {} µs exceeds 2·T₁ = {} µs",
                self.t2_us,
                2.0 * self.t1_us
            ));
        }
        if !(self.sd_rate_khz_per_us >= 0.0) || !(self.gamma0_khz > 0.0) {
            return domain("Γ₀ must be positive and the diffusion rate non-negative");
        }
        Ok(())
    }

    /// `T₂(τ₁)` in µs from `1/(πT₂) = Γ₀ + r·τ₁`.
    pub fn t2_at(&self, tau1_us: f64) -> f64 {
        1e3 / (PI * (self.gamma0_khz + self.sd_rate_khz_per_us * tau1_us))
    }
}

/// `Γ_hom = 1/(πT₂)` in kHz.
pub fn gamma_hom(t2_us: f64) -> Result<f64> {
    if !(t2_us > 0.0) {
        return domain("T₂ must be positive");
    }
    Ok(1e3 / (PI * t2_us))
}

fn noise(noise_frac: f64, seed: u64) -> Result<(ChaCha8Rng, Normal<f64>)> {
    if !(noise_frac >= 0.0) {
        return domain("noise fraction must be non-negative");
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Ok((ChaCha8Rng::seed_from_u64(seed), normal))
}

/// Two-pulse echo intensities `exp(-4τ₂/T₂)` with multiplicative Gaussian
/// noise of relative size `noise_frac`.
pub fn simulate_tpe(
    params: &CoherenceParams,
    tau2_us: &[f64],
    noise_frac: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    params.validate()?;
    if tau2_us.iter().any(|t| !(*t >= 0.0)) {
        return domain("τ₂ values must be non-negative");
    }
    let (mut rng, n) = noise(noise_frac, seed)?;
    Ok(tau2_us
        .iter()
        .map(|t| (-4.0 * t / params.t2_us).exp() * (1.0 + noise_frac * n.sample(&mut rng)))
        .collect())
}

/// `T₂` from two-pulse echo intensities.
pub fn fit_t2(tau2_us: &[f64], intensity: &[f64]) -> Result<Estimate> {
    Ok(fit_exp_decay(tau2_us, intensity, 3)?.time_constant(4.0))
}

/// Stimulated-echo areas, one row per `τ₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeMatrix {
    pub tau1_us: Vec<f64>,
    pub tau2_us: Vec<f64>,
    pub area: Vec<Vec<f64>>,
}

impl SpeMatrix {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "tau1_us,tau2_us,area")?;
        for (t1, row) in self.tau1_us.iter().zip(&self.area) {
            for (t2, a) in self.tau2_us.iter().zip(row) {
                writeln!(out, "{t1},{t2},{a:.9e}")?;
            }
        }
        Ok(())
    }
}

/// `A = exp(-τ₁/T₁) · exp(-4τ₂/T₂(τ₁))` with multiplicative noise.
pub fn simulate_spe(
    params: &CoherenceParams,
    tau1_us: &[f64],
    tau2_us: &[f64],
    noise_frac: f64,
    seed: u64,
) -> Result<SpeMatrix> {
    params.validate()?;
    if tau1_us.iter().chain(tau2_us).any(|t| !(*t >= 0.0)) {
        return domain("delays must be non-negative");
    }
    let (mut rng, n) = noise(noise_frac, seed)?;
    let area = tau1_us
        .iter()
        .map(|&t1| {
            let t2 = params.t2_at(t1);
            tau2_us
                .iter()
                .map(|&tau2| {
                    (-t1 / params.t1_us).exp()
                        * (-4.0 * tau2 / t2).exp()
                        * (1.0 + noise_frac * n.sample(&mut rng))
                })
                .collect()
        })
        .collect();
    Ok(SpeMatrix {
        tau1_us: tau1_us.to_vec(),
        tau2_us: tau2_us.to_vec(),
        area,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub tau1_us: f64,
    pub gamma_khz: f64,
    pub gamma_sigma_khz: f64,
    /// Area extrapolated to `τ₂ = 0`.
    pub area0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct T1Extraction {
    pub t1_us: Estimate,
    pub gamma: Vec<GammaPoint>,
    /// Line `Γ_hom(τ₁)`; its slope estimates the spectral-diffusion rate.
    pub diffusion: LineFit,
}

impl T1Extraction {
    /// Diffusion slope with its confidence interval, kHz/µs.
    pub fn diffusion_rate(&self) -> Estimate {
        let half = t_quantile(self.diffusion.dof) * self.diffusion.slope_sigma;
        Estimate {
            value: self.diffusion.slope,
            ci_low: self.diffusion.slope - half,
            ci_high: self.diffusion.slope + half,
            unbounded: !half.is_finite(),
        }
    }
}

/// Fits each `τ₁` row over `τ₂`, then the extrapolated areas over `τ₁`.
pub fn extract_t1(m: &SpeMatrix) -> Result<T1Extraction> {
    if m.tau1_us.len() < 3 {
        return domain("need at least three τ₁ values");
    }
    if m.tau2_us.len() < 3 {
        return domain("need at least three τ₂ values");
    }
    if m.area.len() != m.tau1_us.len() || m.area.iter().any(|r| r.len() != m.tau2_us.len()) {
        return domain("area matrix does not match its grids");
    }
    let mut gamma = Vec::with_capacity(m.tau1_us.len());
    for (t1, row) in m.tau1_us.iter().zip(&m.area) {
        let f = fit_exp_decay(&m.tau2_us, row, 3)?;
        let scale = 1e3 / (4.0 * PI);
        gamma.push(GammaPoint {
            tau1_us: *t1,
            gamma_khz: f.rate * scale,
            gamma_sigma_khz: f.rate_sigma * scale,
            area0: f.amplitude,
        });
    }
    let x: Vec<f64> = gamma.iter().map(|g| g.tau1_us).collect();
    let a0: Vec<f64> = gamma.iter().map(|g| g.area0).collect();
    let t1 = fit_exp_decay(&x, &a0, 3)?.time_constant(1.0);
    let g: Vec<f64> = gamma.iter().map(|p| p.gamma_khz).collect();
    let weighted = gamma.iter().all(|p| p.gamma_sigma_khz > 0.0);
    let w: Vec<f64> = gamma.iter().map(|p| p.gamma_sigma_khz.powi(-2)).collect();
    let diffusion = fit_line(&x, &g, weighted.then_some(w.as_slice()))?;
    Ok(T1Extraction {
        t1_us: t1,
        gamma,
        diffusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heterodyne {
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    /// Proportional to the echo intensity.
    pub intensity: f64,
    pub phase: f64,
    pub residual_rms: f64,
}

/// Fits `a cos(2πft) + b sin(2πft) + c` at the fixed beat frequency.
pub fn heterodyne_amplitude(trace: &[f64], dt_us: f64, beat_mhz: f64) -> Result<Heterodyne> {
    if !(dt_us > 0.0 && beat_mhz > 0.0) {
        return domain("sampling step and beat frequency must be positive");
    }
    let n = trace.len();
    if (n as f64) * dt_us < 3.0 / beat_mhz || n < 4 {
        return domain("trace must span at least three beat periods");
    }
    let w = 2.0 * PI * beat_mhz;
    let basis = |i: usize| {
        let t = i as f64 * dt_us;
        [(w * t).cos(), (w * t).sin(), 1.0]
    };
    let mut ata = vec![0.0; 9];
    let mut atb = vec![0.0; 3];
    for (i, y) in trace.iter().enumerate() {
        let b = basis(i);
        for r in 0..3 {
            atb[r] += b[r] * y;
            for c in 0..3 {
                ata[3 * r + c] += b[r] * b[c];
            }
        }
    }
    let rss_of = |p: &[f64]| -> f64 {
        trace
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let b = basis(i);
                (y - p[0] * b[0] - p[1] * b[1] - p[2] * b[2]).powi(2)
            })
            .sum()
    };
    let p = solve_dense(ata, atb).map_err(|_| {
        Error::Fit(format!(
            "beat fit singular; residual rms {:.3e}",
            (rss_of(&[0.0, 0.0, 0.0]) / n as f64).sqrt()
        ))
    })?;
    let rss = rss_of(&p);
    let amplitude = p[0].hypot(p[1]);
    if !amplitude.is_finite() {
        return Err(Error::Fit(format!(
            "non-finite amplitude; residual rms {:.3e}",
            (rss / n as f64).sqrt()
        )));
    }
    let sigma = (rss / (n - 3) as f64).sqrt();
    Ok(Heterodyne {
        amplitude,
        amplitude_sigma: sigma * (2.0 / n as f64).sqrt(),
        intensity: amplitude * amplitude,
        phase: p[1].atan2(p[0]),
        residual_rms: (rss / n as f64).sqrt(),
    })
}

/// Synthetic beat `A cos(2πft - φ) + noise`, for tests and demonstrations.
pub fn beat_trace(
    amplitude: f64,
    phase: f64,
    beat_mhz: f64,
    dt_us: f64,
    len: usize,
    noise_sigma: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    (0..len)
        .map(|i| {
            let t = i as f64 * dt_us;
            amplitude * (2.0 * PI * beat_mhz * t - phase).cos() + noise_sigma * n.sample(&mut rng)
        })
        .collect()
}

/// `Ω_R = 5.1/t_π`, rad/µs.
pub fn nutation_rabi(t_pi_us: f64) -> Result<f64> {
    if !(t_pi_us > 0.0) {
        return domain("t_π must be positive");
    }
    Ok(NUTATION_PRODUCT / t_pi_us)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiCalibration {
    /// `Ω_R/2π` per √mW.
    pub slope_mhz_per_sqrt_mw: f64,
    pub slope_sigma: f64,
    /// `(P in mW, Ω_R/2π in MHz)`.
    pub points: Vec<(f64, f64)>,
}

impl RabiCalibration {
    pub fn predict_mhz(&self, power_mw: f64) -> f64 {
        self.slope_mhz_per_sqrt_mw * power_mw.sqrt()
    }
}

/// Least-squares line through the origin in `(√P, Ω_R/2π)`. A single point
/// fixes the slope directly.
pub fn rabi_power_fit(points: &[(f64, f64)]) -> Result<RabiCalibration> {
    if points.is_empty() {
        return domain("no Rabi points");
    }
    if points.iter().any(|(p, _)| !(*p > 0.0)) {
        return domain("probe powers must be positive");
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let x: Vec<f64> = sorted.iter().map(|p| p.0.sqrt()).collect();
    let y: Vec<f64> = sorted.iter().map(|p| p.1).collect();
    let (slope, slope_sigma) = fit_through_origin(&x, &y)?;
    if !(slope > 0.0) {
        return Err(Error::Fit("Rabi slope is not positive".into()));
    }
    Ok(RabiCalibration {
        slope_mhz_per_sqrt_mw: slope,
        slope_sigma,
        points: points.to_vec(),
    })
}

/// Rescales a Rabi slope to a different mode: `Ω_R ∝ 1/√(Δ_H Δ_V)`.
pub fn rabi_mode_scaling(slope_ref: f64, mode_ref: &GaussianMode, mode_new: &GaussianMode) -> f64 {
    slope_ref * ((mode_ref.fwhm_h * mode_ref.fwhm_v) / (mode_new.fwhm_h * mode_new.fwhm_v)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CoherenceParams {
        CoherenceParams::new(57.0, 118.0, 0.0).unwrap()
    }

    #[test]
    fn tpe_decay_law() {
        let i = simulate_tpe(&params(), &[0.0, 14.25], 0.0, 1).unwrap();
        assert_eq!(i[0], 1.0);
        assert!((i[1] - (-1.0_f64).exp()).abs() < 1e-12);
        let taus: Vec<f64> = (1..=8).map(|k| 5.0 * k as f64).collect();
        let i = simulate_tpe(&params(), &taus, 0.0, 1).unwrap();
        assert!((fit_t2(&taus, &i).unwrap().value - 57.0).abs() < 1e-9);
    }

    #[test]
    fn params_are_validated() {
        assert!(CoherenceParams::new(300.0, 118.0, 0.0).is_err());
        assert!(CoherenceParams::new(57.0, 118.0, -1.0).is_err());
        assert!(EchoSequence::new(EchoKind::Tpe, 1.0, 2.0).is_err());
        assert!(EchoSequence::new(EchoKind::Spe, 1.0, 2.0).is_ok());
    }

    #[test]
    fn spe_corner_values() {
        let m = simulate_spe(&params(), &[0.0, 118.0], &[0.0], 0.0, 3).unwrap();
        assert_eq!(m.area[0][0], 1.0);
        assert!((m.area[1][0] - (-1.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn t1_round_trip() {
        for t1 in [118.0, 103.0] {
            let p = CoherenceParams::new(57.0, t1, 0.0).unwrap();
            let tau1 = [0.0, 20.0, 40.0, 60.0, 80.0];
            let tau2 = [2.0, 5.0, 10.0, 15.0, 20.0];
            let m = simulate_spe(&p, &tau1, &tau2, 0.0, 9).unwrap();
            let ex = extract_t1(&m).unwrap();
            assert!((ex.t1_us.value - t1).abs() / t1 < 0.02);
            for g in &ex.gamma {
                assert!((g.gamma_khz - p.gamma0_khz).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_areas_are_unbounded() {
        let m = SpeMatrix {
            tau1_us: vec![0.0, 10.0, 20.0],
            tau2_us: vec![1.0, 2.0, 3.0],
            area: vec![vec![0.5; 3]; 3],
        };
        assert!(extract_t1(&m).unwrap().t1_us.unbounded);
        let short = SpeMatrix {
            tau1_us: vec![0.0, 10.0],
            area: vec![vec![0.5; 3]; 2],
            ..m
        };
        assert!(extract_t1(&short).is_err());
    }

    #[test]
    fn gamma_hom_values() {
        assert!((gamma_hom(57.0).unwrap() - 5.584).abs() < 0.01);
        assert!((gamma_hom(31.8).unwrap() - 10.01).abs() < 0.01);
        assert!(gamma_hom(1e300).unwrap() < 1e-290);
        assert!(gamma_hom(0.0).is_err());
    }

    #[test]
    fn nutation_values() {
        let w = nutation_rabi(0.464).unwrap();
        assert!((w - 2.0 * PI * 1.75).abs() / w < 0.001);
        assert!((nutation_rabi(0.928).unwrap() - w / 2.0).abs() < 1e-12);
        assert!((nutation_rabi(5.1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rabi_fit_cases() {
        let s = 1.75;
        let pts: Vec<(f64, f64)> = [0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&p: &f64| (p, s * p.sqrt()))
            .collect();
        let c = rabi_power_fit(&pts).unwrap();
        assert!((c.slope_mhz_per_sqrt_mw - s).abs() < 1e-12);
        let one = rabi_power_fit(&[(1.0, 2.3)]).unwrap();
        assert_eq!(one.slope_mhz_per_sqrt_mw, 2.3);
        assert!(rabi_power_fit(&[(0.0, 1.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn mode_scaling() {
        let a = GaussianMode::new(3.1, 5.9).unwrap();
        assert_eq!(rabi_mode_scaling(1.0, &a, &a), 1.0);
        let big = GaussianMode::new(31.0, 59.0).unwrap();
        assert!((rabi_mode_scaling(1.0, &a, &big) - 0.1).abs() < 1e-12);
        let t2 = GaussianMode::new(TYPE_II_REFERENCE_MODE.0, TYPE_II_REFERENCE_MODE.1).unwrap();
        let t1 = GaussianMode::new(TYPE_I_NUTATION_MODE.0, TYPE_I_NUTATION_MODE.1).unwrap();
        let r = rabi_mode_scaling(1.0, &t2, &t1);
        assert!((r - 1.6).abs() < 0.1, "{r}");
    }

    #[test]
    fn heterodyne_pure_and_empty() {
        let tr = beat_trace(0.5, 0.7, 10.0, 0.002, 2000, 0.0, 0);
        let h = heterodyne_amplitude(&tr, 0.002, 10.0).unwrap();
        assert!((h.amplitude - 0.5).abs() < 1e-9);
        assert!((h.intensity - 0.25).abs() < 1e-9);
        let zero = beat_trace(0.0, 0.0, 10.0, 0.002, 2000, 0.1, 5);
        let h = heterodyne_amplitude(&zero, 0.002, 10.0).unwrap();
        assert!(h.amplitude < 4.0 * h.amplitude_sigma, "{h:?}");
        assert!(heterodyne_amplitude(&tr[..10], 0.002, 10.0).is_err());
    }
}
