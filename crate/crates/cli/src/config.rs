//! Scenario configuration. Every physical key carries its unit as a suffix;
//! unknown keys are rejected.

use std::path::Path;

use afc_core::source::{calibrate_pit, CavityFilter};
use afc_core::{BiphotonModel, DetectionChain, DutyCycle};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<String>,
    pub seed: u64,
    pub source: SourceConfig,
    pub calibration: CalibrationConfig,
    pub memory: MemoryConfig,
    pub coherence: CoherenceConfig,
    pub nutation: NutationConfig,
    pub echoes: EchoesConfig,
    pub analyze: AnalyzeConfig,
    pub sweep: SweepConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: 1,
            source: SourceConfig::default(),
            calibration: CalibrationConfig::default(),
            memory: MemoryConfig::default(),
            coherence: CoherenceConfig::default(),
            nutation: NutationConfig::default(),
            echoes: EchoesConfig::default(),
            analyze: AnalyzeConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub gamma_s_mhz: f64,
    pub gamma_i_mhz: f64,
    pub biphoton_fwhm_mhz: f64,
    pub mode_count: u32,
    pub fsr_mhz: f64,
    pub filter_cavity_fwhm_mhz: f64,
    pub filter_cavity_fsr_mhz: f64,
    pub etalon_fwhm_mhz: f64,
    pub etalon_fsr_mhz: f64,
    pub herald_eff_source: f64,
    pub herald_eff_waveguide: f64,
    pub signal_det_eff: [f64; 2],
    pub idler_det_eff: [f64; 2],
    pub signal_dark_hz: [f64; 2],
    pub idler_dark_hz: [f64; 2],
    pub pump_power_mw: f64,
    pub duration_s: f64,
    /// Per-mode pair rate per mW; taken from the calibration when absent.
    pub pair_rate_hz_per_mw: Option<f64>,
    pub broadband_hz_per_mw: Option<f64>,
    pub hbt_signal: bool,
    pub hbt_idler: bool,
    pub through_waveguide: bool,
}

impl Default for SourceConfig {
    fn default() -> Self {
        let m = BiphotonModel::default();
        let c = DetectionChain::source();
        Self {
            gamma_s_mhz: m.gamma_s_mhz,
            gamma_i_mhz: m.gamma_i_mhz,
            biphoton_fwhm_mhz: m.biphoton_fwhm_mhz,
            mode_count: m.mode_count,
            fsr_mhz: m.fsr_mhz,
            filter_cavity_fwhm_mhz: m.filter_cavity.fwhm_mhz,
            filter_cavity_fsr_mhz: m.filter_cavity.fsr_mhz,
            etalon_fwhm_mhz: m.etalon.fwhm_mhz,
            etalon_fsr_mhz: m.etalon.fsr_mhz,
            herald_eff_source: DetectionChain::HERALD_EFF_SOURCE,
            herald_eff_waveguide: DetectionChain::HERALD_EFF_WAVEGUIDE,
            signal_det_eff: c.signal_det_eff,
            idler_det_eff: c.idler_det_eff,
            signal_dark_hz: c.signal_dark_hz,
            idler_dark_hz: c.idler_dark_hz,
            pump_power_mw: 2.0,
            duration_s: 10.0,
            pair_rate_hz_per_mw: None,
            broadband_hz_per_mw: None,
            hbt_signal: false,
            hbt_idler: false,
            through_waveguide: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub g_pre: f64,
    pub g_post: f64,
    pub power_mw: f64,
    pub window_ns: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            g_pre: 13.8,
            g_post: 36.0,
            power_mw: 2.0,
            window_ns: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    pub eta0: f64,
    pub t2star_us: f64,
    pub pit_transmission: f64,
    pub coupling: f64,
    pub window_ns: f64,
    pub tau_us: Vec<f64>,
    pub cryostat_hz: f64,
    pub duty_cycle: f64,
    pub duration_s: f64,
    pub pump_power_mw: f64,
    pub g_ii: f64,
    pub g_ii_sigma: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        let d = DutyCycle::afc();
        Self {
            eta0: 0.1,
            t2star_us: 8.0,
            pit_transmission: 0.85,
            coupling: 0.40,
            window_ns: 400.0,
            tau_us: vec![1.5, 2.5, 3.5, 4.5, 5.5],
            cryostat_hz: d.cryostat_hz,
            duty_cycle: d.live_fraction,
            duration_s: 480.0,
            pump_power_mw: 2.0,
            g_ii: 1.25,
            g_ii_sigma: 0.03,
        }
    }
}

impl MemoryConfig {
    /// `η₀ exp(-4τ/T2*)`.
    pub fn eta_at(&self, tau_us: f64) -> f64 {
        self.eta0 * (-4.0 * tau_us / self.t2star_us).exp()
    }

    pub fn duty(&self) -> DutyCycle {
        DutyCycle {
            cryostat_hz: self.cryostat_hz,
            live_fraction: self.duty_cycle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceConfig {
    pub t2_us: f64,
    pub t1_us: f64,
    pub sd_rate_khz_per_us: f64,
    pub noise_frac: f64,
    pub tau2_us: Vec<f64>,
    pub tau1_us: Vec<f64>,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self {
            t2_us: 57.0,
            t1_us: 118.0,
            sd_rate_khz_per_us: 0.0,
            noise_frac: 0.05,
            tau2_us: (1..=10).map(|k| 2.0 * k as f64).collect(),
            tau1_us: (0..9).map(|k| 15.0 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NutationConfig {
    /// `[power_mw, rabi_mhz]` pairs; synthetic points are used when empty.
    pub points: Vec<[f64; 2]>,
    pub slope_mhz_per_sqrt_mw: f64,
    pub noise_frac: f64,
    pub ref_mode_fwhm_um: [f64; 2],
    pub new_mode_fwhm_um: [f64; 2],
}

impl Default for NutationConfig {
    fn default() -> Self {
        use afc_core::coherence::{TYPE_II_REFERENCE_MODE, TYPE_I_NUTATION_MODE};
        Self {
            points: Vec::new(),
            slope_mhz_per_sqrt_mw: 1.75,
            noise_frac: 0.0,
            ref_mode_fwhm_um: [TYPE_II_REFERENCE_MODE.0, TYPE_II_REFERENCE_MODE.1],
            new_mode_fwhm_um: [TYPE_I_NUTATION_MODE.0, TYPE_I_NUTATION_MODE.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EchoesConfig {
    pub peak_od: f64,
    pub background_od: f64,
    pub span_mhz: f64,
    pub tau_us: Vec<f64>,
    pub input_time_us: f64,
    pub input_fwhm_ns: f64,
}

impl Default for EchoesConfig {
    fn default() -> Self {
        Self {
            peak_od: 1.0,
            background_od: 0.0,
            span_mhz: 16.0,
            tau_us: vec![5.5, 2.5, 1.5],
            input_time_us: 5.0,
            input_fwhm_ns: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub window_ns: f64,
    pub bin_ns: f64,
    pub half_range_ns: f64,
    pub idler_channel: u8,
    pub signal_channel: u8,
    pub signal_b_channel: u8,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            window_ns: 400.0,
            bin_ns: 1.0,
            half_range_ns: 10_000.0,
            idler_channel: afc_core::source::CH_IDLER,
            signal_channel: afc_core::source::CH_SIGNAL,
            signal_b_channel: afc_core::source::CH_SIGNAL_B,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub power_mw: Vec<f64>,
    pub duration_s: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            power_mw: vec![0.1, 0.25, 0.5, 1.0, 1.5, 2.0],
            duration_s: 60.0,
        }
    }
}

/// Per-mode pair rate and broadband rate at 1 mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatesPerMw {
    pub pair_hz: f64,
    pub broadband_hz: f64,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model()?;
        self.chain(false)?;
        self.memory.duty().validate()?;
        let m = &self.memory;
        if !(m.eta0 > 0.0 && m.eta0 <= 1.0) || !(m.t2star_us > 0.0) {
            return Err(CliError::Config(
                "memory.eta0 must lie in (0, 1] and t2star_us be positive".into(),
            ));
        }
        if m.tau_us
            .iter()
            .any(|t| *t < afc_core::source::MIN_STORAGE_US)
        {
            return Err(CliError::Config(
                "memory.tau_us values must be at least 1.5".into(),
            ));
        }
        if !(self.source.duration_s > 0.0)
            || !(m.duration_s > 0.0)
            || !(self.sweep.duration_s > 0.0)
        {
            return Err(CliError::Config("durations must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<BiphotonModel, CliError> {
        let s = &self.source;
        let m = BiphotonModel {
            gamma_s_mhz: s.gamma_s_mhz,
            gamma_i_mhz: s.gamma_i_mhz,
            biphoton_fwhm_mhz: s.biphoton_fwhm_mhz,
            mode_count: s.mode_count,
            fsr_mhz: s.fsr_mhz,
            filter_cavity: CavityFilter {
                fwhm_mhz: s.filter_cavity_fwhm_mhz,
                fsr_mhz: s.filter_cavity_fsr_mhz,
            },
            etalon: CavityFilter {
                fwhm_mhz: s.etalon_fwhm_mhz,
                fsr_mhz: s.etalon_fsr_mhz,
            },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn chain(&self, waveguide: bool) -> Result<DetectionChain, CliError> {
        let s = &self.source;
        let c = DetectionChain {
            herald_eff: if waveguide {
                s.herald_eff_waveguide
            } else {
                s.herald_eff_source
            },
            signal_det_eff: s.signal_det_eff,
            idler_det_eff: s.idler_det_eff,
            signal_dark_hz: s.signal_dark_hz,
            idler_dark_hz: s.idler_dark_hz,
        };
        c.validate()?;
        Ok(c)
    }

    /// Explicit rates when configured, else solved from the target
    /// cross-correlations.
    pub fn rates_per_mw(&self) -> Result<RatesPerMw, CliError> {
        if let (Some(p), Some(b)) = (
            self.source.pair_rate_hz_per_mw,
            self.source.broadband_hz_per_mw,
        ) {
            return Ok(RatesPerMw {
                pair_hz: p,
                broadband_hz: b,
            });
        }
        let c = &self.calibration;
        let cal = calibrate_pit(&self.model()?, c.g_pre, c.g_post, c.window_ns)?;
        Ok(RatesPerMw {
            pair_hz: self
                .source
                .pair_rate_hz_per_mw
                .unwrap_or(cal.pair_rate_hz / c.power_mw),
            broadband_hz: self
                .source
                .broadband_hz_per_mw
                .unwrap_or(cal.broadband_hz / c.power_mw),
        })
    }

    /// SHA-256 of the canonical JSON form; object keys are sorted, so the
    /// hash does not depend on key order in the file.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises");
        let canonical = serde_json::to_string(&value).expect("value serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a = ScenarioConfig::parse("seed = 4\n[source]\nmode_count = 2\npump_power_mw = 1.0\n")
            .unwrap();
        let b = ScenarioConfig::parse(
            "[source]\npump_power_mw = 1.0\nmode_count = 2\n\n[memory]\n\n[calibration]\n",
        )
        .unwrap();
        let b = ScenarioConfig { seed: 4, ..b };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), ScenarioConfig::default().hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::parse("[source]\npump_power = 1.0\n").is_err());
        assert!(ScenarioConfig::parse("sead = 1\n").is_err());
    }

    #[test]
    fn default_rates_come_from_calibration() {
        let r = ScenarioConfig::default().rates_per_mw().unwrap();
        assert!(r.pair_hz > 5_000.0 && r.pair_hz < 10_000.0, "{}", r.pair_hz);
        assert!((r.broadband_hz / r.pair_hz - 3.037).abs() < 0.01);
    }
}
