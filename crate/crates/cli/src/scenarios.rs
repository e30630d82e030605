use std::path::Path;

use afc_core::coherence::{
    extract_t1, fit_t2, rabi_mode_scaling, rabi_power_fit, simulate_spe, simulate_tpe,
    CoherenceParams,
};
use afc_core::counting::{
    coincidence_histogram, g2_cross, heralded_autocorrelation, unconditional_autocorrelation,
};
use afc_core::memory::{fit_effective_t2star, simulate_storage, storage_input};
use afc_core::source::{expected_rates, generate_timetags, GenerateOptions};
use afc_core::spectral::{carve_comb, AbsorptionProfile, CombSpec, FreqGrid, PitSpec};
use afc_core::timetag::{read_any, write_binary_with, write_csv_with, FileHeader};
use afc_core::waveguide::{focal_spot_fwhm, reproduce_table1, FocusingSetup, LossBudget, TABLE1};
use afc_core::{EchoWindows, Error, GaussianMode, Measured, NoiseRates};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::output::{Format, Outputs, Table};
use crate::pipeline::{self, PhotonSetup, StorageParams, StoragePoint};
use crate::{CliError, Figure};

/// Independent seed for parameter point `k`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn photon_setup(cfg: &ScenarioConfig) -> Result<PhotonSetup, CliError> {
    let rates = cfg.rates_per_mw()?;
    Ok(PhotonSetup {
        model: cfg.model()?,
        source_chain: cfg.chain(false)?,
        waveguide_chain: cfg.chain(true)?,
        pair_hz_per_mw: rates.pair_hz,
        broadband_hz_per_mw: rates.broadband_hz,
        window_ns: cfg.memory.window_ns,
        pit_transmission: cfg.memory.pit_transmission,
    })
}

fn budget_table(name: &str, budgets: &[LossBudget]) -> Table {
    let mut t = Table::new(
        name,
        &[
            "type",
            "d_um",
            "fwhm_h_um",
            "fwhm_v_um",
            "il_db",
            "cl_db",
            "fl_db",
            "pl_db_per_cm",
        ],
    );
    for b in budgets {
        t.push(vec![
            json!(match b.kind {
                afc_core::WaveguideKind::TypeI => "I",
                afc_core::WaveguideKind::TypeII => "II",
            }),
            json!(b.track_separation_um),
            json!(b.mode.fwhm_h),
            json!(b.mode.fwhm_v),
            json!(b.insertion_db),
            json!(round4(b.coupling_db)),
            json!(round4(b.fresnel_db)),
            json!(round4(b.propagation_db_per_cm)),
        ]);
    }
    t
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn focal_spot() -> Result<f64, CliError> {
    Ok(focal_spot_fwhm(&FocusingSetup {
        wavelength_nm: 633.0,
        focal_length_mm: 75.0,
        beam_diameter_mm: 6.0,
    })?)
}

pub fn budget() -> Result<Outputs, CliError> {
    let budgets = reproduce_table1()?;
    let mut out = Outputs::default();
    out.tables.push(budget_table("budget", &budgets));
    out.set("focal_spot_fwhm_um", focal_spot()?);
    Ok(out)
}

pub fn table1() -> Result<Outputs, CliError> {
    let budgets = reproduce_table1()?;
    let mut t = Table::new(
        "table1",
        &[
            "type",
            "d_um",
            "cl_db",
            "cl_listed_db",
            "fl_db",
            "fl_listed_db",
            "pl_db_per_cm",
            "pl_listed_db_per_cm",
        ],
    );
    let (mut cl_dev, mut fl_dev, mut pl_dev) = (0.0f64, 0.0f64, 0.0f64);
    for (b, r) in budgets.iter().zip(TABLE1.iter()) {
        cl_dev = cl_dev.max((b.coupling_db - r.cl_db).abs());
        fl_dev = fl_dev.max((b.fresnel_db - r.fl_db).abs());
        pl_dev = pl_dev.max((b.propagation_db_per_cm - r.pl_db_per_cm).abs());
        t.push(vec![
            json!(if b.track_separation_um.is_some() {
                "II"
            } else {
                "I"
            }),
            json!(b.track_separation_um),
            json!(round4(b.coupling_db)),
            json!(r.cl_db),
            json!(round4(b.fresnel_db)),
            json!(r.fl_db),
            json!(round4(b.propagation_db_per_cm)),
            json!(r.pl_db_per_cm),
        ]);
    }
    let mut out = Outputs::default();
    out.tables.push(t);
    out.set("max_cl_deviation_db", round4(cl_dev));
    out.set("max_fl_deviation_db", round4(fl_dev));
    out.set("max_pl_deviation_db_per_cm", round4(pl_dev));
    out.set("focal_spot_fwhm_um", focal_spot()?);
    Ok(out)
}

pub fn fig1b() -> Result<Outputs, CliError> {
    let budgets = reproduce_table1()?;
    let mut t = Table::new("fig1b", &["type", "d_um", "fwhm_h_um", "il_db", "cl_db"]);
    for b in &budgets {
        t.push(vec![
            json!(if b.track_separation_um.is_some() {
                "II"
            } else {
                "I"
            }),
            json!(b.track_separation_um),
            json!(b.mode.fwhm_h),
            json!(b.insertion_db),
            json!(round4(b.coupling_db)),
        ]);
    }
    let mut out = Outputs::default();
    out.tables.push(t);
    Ok(out)
}

pub fn echoes(cfg: &ScenarioConfig) -> Result<Outputs, CliError> {
    let e = &cfg.echoes;
    let input = storage_input(e.input_time_us, e.input_fwhm_ns)?;
    let grid = FreqGrid::comb_default();
    let flat = AbsorptionProfile::flat(grid, 0.0)?;
    let pit = AbsorptionProfile::flat(grid, PitSpec::default().residual_od)?;
    let results: Vec<_> = e
        .tau_us
        .par_iter()
        .map(|&tau| -> Result<_, CliError> {
            let comb = CombSpec::for_storage_time(tau, e.peak_od, e.background_od, e.span_mhz);
            let profile = carve_comb(&flat, &comb)?;
            let windows = EchoWindows {
                window_ns: cfg.memory.window_ns,
                pit_transmission: cfg.memory.pit_transmission,
                ..EchoWindows::new(e.input_time_us, tau)
            };
            Ok((
                tau,
                comb,
                simulate_storage(&profile, &pit, &input, &windows, cfg.memory.coupling)?,
            ))
        })
        .collect::<Result<_, _>>()?;

    let mut t = Table::new(
        "echoes",
        &[
            "tau_us",
            "periodicity_mhz",
            "echo_time_us",
            "eta_internal",
            "eta_total",
        ],
    );
    let mut names = vec!["time_us".to_string()];
    for (tau, comb, r) in &results {
        t.push(vec![
            json!(tau),
            json!(comb.periodicity_mhz),
            json!(r.echo_time_us),
            json!(r.internal_efficiency),
            json!(r.total_efficiency),
        ]);
        names.push(format!("intensity_tau_{tau}"));
    }
    let cols: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut traces = Table::new("echo_traces", &cols);
    let intensities: Vec<Vec<f64>> = results
        .iter()
        .map(|(_, _, r)| r.output.intensity())
        .collect();
    for i in (0..input.len()).step_by(4) {
        let mut row = vec![json!(input.time(i))];
        row.extend(intensities.iter().map(|v| json!(v[i])));
        traces.push(row);
    }
    let mut out = Outputs::default();
    out.tables.push(t);
    out.tables.push(traces);
    Ok(out)
}

pub fn nutation(cfg: &ScenarioConfig, seed: u64) -> Result<Outputs, CliError> {
    let n = &cfg.nutation;
    let points: Vec<(f64, f64)> = if n.points.is_empty() {
        let normal =
            Normal::new(0.0, n.noise_frac.max(0.0)).map_err(|e| CliError::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (1..=8)
            .map(|k| {
                let p = 0.25 * k as f64;
                (
                    p,
                    n.slope_mhz_per_sqrt_mw * p.sqrt() * (1.0 + normal.sample(&mut rng)),
                )
            })
            .collect()
    } else {
        n.points.iter().map(|p| (p[0], p[1])).collect()
    };
    let cal = rabi_power_fit(&points)?;
    let reference = GaussianMode::new(n.ref_mode_fwhm_um[0], n.ref_mode_fwhm_um[1])?;
    let new = GaussianMode::new(n.new_mode_fwhm_um[0], n.new_mode_fwhm_um[1])?;
    let mut t = Table::new("nutation", &["power_mw", "rabi_mhz", "fit_mhz"]);
    for &(p, f) in &points {
        t.push(vec![json!(p), json!(f), json!(cal.predict_mhz(p))]);
    }
    let mut out = Outputs::default();
    out.tables.push(t);
    out.set("slope_mhz_per_sqrt_mw", cal.slope_mhz_per_sqrt_mw);
    out.set("slope_sigma", cal.slope_sigma);
    out.set(
        "mode_scaling_ratio",
        rabi_mode_scaling(1.0, &reference, &new),
    );
    Ok(out)
}

pub fn fig3(cfg: &ScenarioConfig, seed: u64) -> Result<Outputs, CliError> {
    let c = &cfg.coherence;
    let params = CoherenceParams::new(c.t2_us, c.t1_us, c.sd_rate_khz_per_us)?;
    let tpe = simulate_tpe(&params, &c.tau2_us, c.noise_frac, derive_seed(seed, 0))?;
    let t2 = fit_t2(&c.tau2_us, &tpe)?;
    let spe = simulate_spe(
        &params,
        &c.tau1_us,
        &c.tau2_us,
        c.noise_frac,
        derive_seed(seed, 1),
    )?;
    let ex = extract_t1(&spe)?;

    let mut a = Table::new("fig3a_tpe", &["tau2_us", "intensity"]);
    for (t, i) in c.tau2_us.iter().zip(&tpe) {
        a.push(vec![json!(t), json!(i)]);
    }
    let mut s = Table::new("fig3c_spe", &["tau1_us", "tau2_us", "area"]);
    for (i, t1) in spe.tau1_us.iter().enumerate() {
        for (j, t2v) in spe.tau2_us.iter().enumerate() {
            s.push(vec![json!(t1), json!(t2v), json!(spe.area[i][j])]);
        }
    }
    let mut g = Table::new(
        "fig3d_gamma",
        &["tau1_us", "gamma_hom_khz", "gamma_sigma_khz", "area0"],
    );
    for p in &ex.gamma {
        g.push(vec![
            json!(p.tau1_us),
            json!(p.gamma_khz),
            json!(p.gamma_sigma_khz),
            json!(p.area0),
        ]);
    }
    let mut out = Outputs::default();
    out.tables.extend([a, s, g]);
    out.set("t2_us", estimate_json(&t2));
    out.set("t1_us", estimate_json(&ex.t1_us));
    out.set("diffusion_khz_per_us", estimate_json(&ex.diffusion_rate()));
    Ok(out)
}

fn estimate_json(e: &afc_core::Estimate) -> Value {
    json!({ "value": e.value, "ci_low": e.ci_low, "ci_high": e.ci_high, "unbounded": e.unbounded })
}

pub fn source(
    cfg: &ScenarioConfig,
    seed: u64,
    format: Format,
    hash: &str,
) -> Result<Outputs, CliError> {
    let s = &cfg.source;
    let setup = photon_setup(cfg)?;
    let chain = if s.through_waveguide {
        setup.waveguide_chain
    } else {
        setup.source_chain
    };
    let pair = setup.pair_hz_per_mw * s.pump_power_mw;
    let noise = NoiseRates {
        broadband_hz: setup.broadband_hz_per_mw * s.pump_power_mw,
    };
    let opts = GenerateOptions {
        hbt_signal: s.hbt_signal,
        hbt_idler: s.hbt_idler,
        ..Default::default()
    };
    let streams = generate_timetags(
        &setup.model,
        &chain,
        pair,
        &noise,
        s.duration_s,
        &opts,
        seed,
    )?;
    let all = streams.all();
    let mut bytes = Vec::new();
    let header = FileHeader {
        seed: Some(seed),
        config_hash: Some(hash.to_string()),
    };
    let name = match format {
        Format::Csv => {
            write_csv_with(&mut bytes, &all, &header)?;
            "timetags.csv"
        }
        Format::Json => {
            write_binary_with(&mut bytes, &all, &header)?;
            "timetags.bin"
        }
    };
    let mut out = Outputs::default();
    out.raw.push((name.into(), bytes));
    let mut t = Table::new(
        "channels",
        &[
            "channel",
            "events",
            "pair",
            "other_mode",
            "broadband",
            "dark",
        ],
    );
    for st in &all {
        let c = pipeline::origin_counts(st);
        t.push(vec![
            json!(st.channel()),
            json!(st.len()),
            json!(c[0].1),
            json!(c[1].1),
            json!(c[2].1),
            json!(c[3].1),
        ]);
    }
    out.tables.push(t);
    let e = expected_rates(&setup.model, &chain, pair, &noise, &opts);
    out.set("pair_rate_per_mode_hz", pair);
    out.set("broadband_hz", noise.broadband_hz);
    out.set("expected_herald_hz", e.herald_hz);
    out.set("expected_signal_hz", e.signal_hz);
    out.set("duration_s", s.duration_s);
    Ok(out)
}

pub fn analyze(cfg: &ScenarioConfig, input: &Path) -> Result<Outputs, CliError> {
    let a = &cfg.analyze;
    let file = read_any(std::fs::File::open(input)?)?;
    let get = |ch: u8| {
        file.stream(ch)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::EmptyStream(format!("channel {ch} has no events")))
    };
    let idler = get(a.idler_channel)?;
    let signal = get(a.signal_channel)?;
    let hist = coincidence_histogram(idler, signal, a.bin_ns, (-a.half_range_ns, a.half_range_ns))?;
    let g = g2_cross(&hist, a.window_ns, None, None)?;
    let mut t = Table::new("histogram", &["bin_center_ns", "counts"]);
    for (i, c) in hist.counts.iter().enumerate() {
        t.push(vec![json!(hist.bin_center(i)), json!(c)]);
    }
    let mut out = Outputs::default();
    out.tables.push(t);
    out.set("g2_si", &g);
    if let Some(b) = file.stream(a.signal_b_channel).filter(|s| !s.is_empty()) {
        out.set(
            "g2_ss",
            unconditional_autocorrelation(signal, b, a.window_ns)?,
        );
        out.set(
            "heralded",
            heralded_autocorrelation(idler, signal, b, a.window_ns)?,
        );
    }
    out.set("seed_in_file", file.seed);
    Ok(out)
}

/// Storage runs for every configured `τ`, in parallel.
pub fn storage_sweep(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<StoragePoint>, CliError> {
    let setup = photon_setup(cfg)?;
    let m = &cfg.memory;
    m.tau_us
        .par_iter()
        .enumerate()
        .map(|(k, &tau)| {
            let p = StorageParams {
                power_mw: m.pump_power_mw,
                tau_us: tau,
                eta_afc: m.eta_at(tau),
                duty: m.duty(),
                duration_s: m.duration_s,
                g_ii: Measured::new(m.g_ii, m.g_ii_sigma),
            };
            Ok(pipeline::storage_point(
                &setup,
                &p,
                derive_seed(seed, k as u64),
            )?)
        })
        .collect()
}

fn storage_table(name: &str, points: &[StoragePoint]) -> Table {
    let mut t = Table::new(
        name,
        &[
            "tau_us",
            "eta_set",
            "eta_measured",
            "eta_sigma",
            "g2_afc",
            "g2_afc_sigma",
            "classical_bound",
            "bound_significance",
            "r",
            "r_sigma",
        ],
    );
    for p in points {
        t.push(vec![
            json!(p.tau_us),
            json!(p.eta_set),
            json!(p.eta_measured),
            json!(p.eta_sigma),
            json!(p.g_afc.g2),
            json!(p.g_afc.sigma),
            json!(pipeline::classical_bound(&p.cs)),
            json!(p.bound_significance()),
            json!(p.cs.r_value),
            json!(p.cs.sigma_r),
        ]);
    }
    t
}

pub fn storage(cfg: &ScenarioConfig, seed: u64) -> Result<Outputs, CliError> {
    let points = storage_sweep(cfg, seed)?;
    let mut out = Outputs::default();
    out.tables.push(storage_table("storage", &points));
    out.set("points", &points);
    Ok(out)
}

pub fn fig5b(cfg: &ScenarioConfig, seed: u64) -> Result<Outputs, CliError> {
    let points = storage_sweep(cfg, seed)?;
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.tau_us, p.eta_measured)).collect();
    let fit = fit_effective_t2star(&pairs)?;
    let mut t = Table::new("fig5b", &["tau_us", "eta_measured", "eta_sigma", "eta_fit"]);
    for p in &points {
        t.push(vec![
            json!(p.tau_us),
            json!(p.eta_measured),
            json!(p.eta_sigma),
            json!(fit.eta0 * (-4.0 * p.tau_us / fit.t2star_us.value).exp()),
        ]);
    }
    let mut out = Outputs::default();
    out.tables.push(t);
    out.set("eta0", fit.eta0);
    out.set("t2star_us", estimate_json(&fit.t2star_us));
    Ok(out)
}

pub fn fig5c(cfg: &ScenarioConfig, seed: u64) -> Result<Outputs, CliError> {
    let points = storage_sweep(cfg, seed)?;
    let mut out = Outputs::default();
    out.tables.push(storage_table("fig5c", &points));
    Ok(out)
}

pub fn fig4a(cfg: &ScenarioConfig, seed: u64) -> Result<Outputs, CliError> {
    let setup = photon_setup(cfg)?;
    let points = cfg
        .sweep
        .power_mw
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            pipeline::pit_correlations(&setup, p, cfg.sweep.duration_s, derive_seed(seed, k as u64))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(
        "fig4a",
        &[
            "power_mw",
            "g2_source",
            "g2_source_sigma",
            "g2_pit",
            "g2_pit_sigma",
        ],
    );
    for p in &points {
        t.push(vec![
            json!(p.power_mw),
            json!(p.source.g2),
            json!(p.source.sigma),
            json!(p.pit.g2),
            json!(p.pit.sigma),
        ]);
    }
    let mut out = Outputs::default();
    out.tables.push(t);
    out.set("pair_rate_hz_per_mw", setup.pair_hz_per_mw);
    out.set("broadband_hz_per_mw", setup.broadband_hz_per_mw);
    Ok(out)
}

pub fn reproduce(figure: Figure, cfg: &ScenarioConfig, seed: u64) -> Result<Outputs, CliError> {
    match figure {
        Figure::Fig1b => fig1b(),
        Figure::Fig3 => fig3(cfg, seed),
        Figure::Fig4a => fig4a(cfg, seed),
        Figure::Fig5b => fig5b(cfg, seed),
        Figure::Fig5c => fig5c(cfg, seed),
        Figure::Table1 => table1(),
    }
}
