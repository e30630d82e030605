//! Gaussian-beam focusing, mode-overlap coupling and waveguide loss budgets.
//!
//! Mode sizes are full widths at half maximum of the *intensity* profile.
//! A field with intensity FWHM `Δ` is written `exp(-1.39 x²/Δ²)`; the
//! constant 1.39 ≈ 2 ln 2 is kept as is so that computed coupling losses line
//! up with the tabulated ones.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fit;

/// Field exponent constant for FWHM-parameterised Gaussian modes.
pub const FIELD_EXPONENT: f64 = 1.39;

/// Tolerance (dB) on the closure `IL = CL + FL + PL·L`.
pub const BUDGET_TOLERANCE_DB: f64 = 0.05;

/// Crystal length of the characterised sample, cm.
pub const CRYSTAL_LENGTH_CM: f64 = 0.37;

/// Refractive index of the host crystal.
pub const CRYSTAL_INDEX: f64 = 1.8;

/// FWHM of the focal spot used to couple into the waveguides, µm.
pub const FOCAL_SPOT_FWHM_UM: f64 = 5.9;

/// Elliptical Gaussian mode described by its horizontal and vertical FWHM (µm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    pub fwhm_h: f64,
    pub fwhm_v: f64,
}

impl GaussianMode {
    pub fn new(fwhm_h: f64, fwhm_v: f64) -> Result<Self> {
        if !(fwhm_h > 0.0 && fwhm_v > 0.0) || !fwhm_h.is_finite() || !fwhm_v.is_finite() {
            return domain(format!(
                "mode widths must be positive, got {fwhm_h} x {fwhm_v}"
            ));
        }
        Ok(Self { fwhm_h, fwhm_v })
    }

    pub fn circular(fwhm: f64) -> Result<Self> {
        Self::new(fwhm, fwhm)
    }

    /// Product of the two FWHM, proportional to the mode area.
    pub fn area_um2(&self) -> f64 {
        self.fwhm_h * self.fwhm_v
    }

    fn field(&self, x: f64, y: f64) -> f64 {
        (-FIELD_EXPONENT
            * (x * x / (self.fwhm_h * self.fwhm_h) + y * y / (self.fwhm_v * self.fwhm_v)))
            .exp()
    }
}

/// Lens focusing of a collimated Gaussian beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusingSetup {
    pub wavelength_nm: f64,
    pub focal_length_mm: f64,
    /// `1/e²` diameter of the beam at the lens, mm.
    pub beam_diameter_mm: f64,
}

/// FWHM of the focal spot in µm: `2.36 λ f / (π D₀)`.
pub fn focal_spot_fwhm(setup: &FocusingSetup) -> Result<f64> {
    let FocusingSetup {
        wavelength_nm,
        focal_length_mm,
        beam_diameter_mm,
    } = *setup;
    if !(wavelength_nm > 0.0 && focal_length_mm > 0.0 && beam_diameter_mm > 0.0) {
        return domain("focusing parameters must be strictly positive");
    }
    let lambda_um = wavelength_nm * 1e-3;
    let f_um = focal_length_mm * 1e3;
    let d_um = beam_diameter_mm * 1e3;
    Ok(2.36 * lambda_um * f_um / (std::f64::consts::PI * d_um))
}

/// Points per axis used for the overlap quadrature.
pub const OVERLAP_POINTS: usize = 512;

/// Power coupling efficiency between two co-axial Gaussian modes, from a
/// direct 2-D quadrature of the normalised field-overlap integral.
pub fn overlap_efficiency(a: &GaussianMode, b: &GaussianMode) -> f64 {
    overlap_efficiency_with(a, b, OVERLAP_POINTS)
}

/// As [`overlap_efficiency`] with an explicit grid size (at least 256).
pub fn overlap_efficiency_with(a: &GaussianMode, b: &GaussianMode, points: usize) -> f64 {
    let n = points.max(256);
    let half_x = 3.0 * a.fwhm_h.max(b.fwhm_h);
    let half_y = 3.0 * a.fwhm_v.max(b.fwhm_v);
    let coord = |half: f64, i: usize| -half + 2.0 * half * i as f64 / (n - 1) as f64;
    let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let x = coord(half_x, i);
        let wx = weight(i);
        for j in 0..n {
            let y = coord(half_y, j);
            let w = wx * weight(j);
            let fa = a.field(x, y);
            let fb = b.field(x, y);
            ab += w * fa * fb;
            aa += w * fa * fa;
            bb += w * fb * fb;
        }
    }
    (ab * ab / (aa * bb)).min(1.0)
}

/// Converts a power fraction into a loss in dB.
pub fn loss_db(fraction: f64) -> f64 {
    -10.0 * fraction.log10()
}

/// Single-interface Fresnel loss at normal incidence, dB.
pub fn fresnel_loss_db(refractive_index: f64) -> Result<f64> {
    if !(refractive_index > 0.0) || !refractive_index.is_finite() {
        return domain(format!(
            "refractive index must be positive, got {refractive_index}"
        ));
    }
    let r = ((refractive_index - 1.0) / (refractive_index + 1.0)).powi(2);
    Ok(loss_db(1.0 - r))
}

/// Propagation loss per cm, with the Fresnel loss counted once (the input
/// facet is anti-reflection coated). A numerator negative by more than
/// [`BUDGET_TOLERANCE_DB`] is rejected; smaller deficits clamp to zero.
pub fn propagation_loss(il_db: f64, cl_db: f64, fl_db: f64, length_cm: f64) -> Result<f64> {
    if !(length_cm > 0.0) {
        return domain(format!("crystal length must be positive, got {length_cm}"));
    }
    let excess = il_db - cl_db - fl_db;
    if excess < -BUDGET_TOLERANCE_DB {
        return Err(Error::Inconsistent(format!(
            "coupling ({cl_db} dB) plus Fresnel ({fl_db} dB) exceed insertion loss ({il_db} dB)"
        )));
    }
    Ok(excess.max(0.0) / length_cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveguideKind {
    #[serde(rename = "I")]
    TypeI,
    #[serde(rename = "II")]
    TypeII,
}

/// Loss decomposition of one waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub kind: WaveguideKind,
    pub insertion_db: f64,
    pub coupling_db: f64,
    pub fresnel_db: f64,
    pub propagation_db_per_cm: f64,
    pub crystal_length_cm: f64,
    pub mode: GaussianMode,
    /// Separation of the damage tracks (type II only), µm.
    pub track_separation_um: Option<f64>,
}

impl LossBudget {
    /// Builds a budget from a measured insertion loss and mode, computing
    /// CL from the overlap with `spot`, FL from `refractive_index` and PL by
    /// closure.
    pub fn from_measurement(
        kind: WaveguideKind,
        track_separation_um: Option<f64>,
        mode: GaussianMode,
        insertion_db: f64,
        spot: &GaussianMode,
        refractive_index: f64,
        crystal_length_cm: f64,
    ) -> Result<Self> {
        let coupling_db = loss_db(overlap_efficiency(&mode, spot));
        let fresnel_db = fresnel_loss_db(refractive_index)?;
        let propagation_db_per_cm =
            propagation_loss(insertion_db, coupling_db, fresnel_db, crystal_length_cm)?;
        let budget = Self {
            kind,
            insertion_db,
            coupling_db,
            fresnel_db,
            propagation_db_per_cm,
            crystal_length_cm,
            mode,
            track_separation_um,
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        if self.insertion_db < 0.0 || self.coupling_db < 0.0 || self.fresnel_db < 0.0 {
            return Err(Error::Inconsistent(
                "loss terms must be non-negative".into(),
            ));
        }
        if self.propagation_db_per_cm < 0.0 {
            return Err(Error::Inconsistent("propagation loss is negative".into()));
        }
        if !(self.crystal_length_cm > 0.0) {
            return domain("crystal length must be positive");
        }
        let closure = self.insertion_db
            - self.coupling_db
            - self.fresnel_db
            - self.propagation_db_per_cm * self.crystal_length_cm;
        // Clamping PL at zero leaves at most the tolerance as residual.
        if closure.abs() > BUDGET_TOLERANCE_DB + 1e-12 {
            return Err(Error::Inconsistent(format!(
                "budget does not close: residual {closure:.3} dB"
            )));
        }
        Ok(())
    }
}

/// One row of the published characterisation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub kind: WaveguideKind,
    pub track_separation_um: Option<f64>,
    pub fwhm_h_um: f64,
    pub fwhm_v_um: f64,
    pub il_db: f64,
    pub cl_db: f64,
    pub fl_db: f64,
    pub pl_db_per_cm: f64,
}

const fn row(
    kind: WaveguideKind,
    d: Option<f64>,
    h: f64,
    v: f64,
    il: f64,
    cl: f64,
    pl: f64,
) -> TableRow {
    TableRow {
        kind,
        track_separation_um: d,
        fwhm_h_um: h,
        fwhm_v_um: v,
        il_db: il,
        cl_db: cl,
        fl_db: 0.37,
        pl_db_per_cm: pl,
    }
}

/// Measured waveguides: one type I and five type II with increasing track
/// separation.
pub const TABLE1: [TableRow; 6] = [
    row(WaveguideKind::TypeI, None, 3.1, 5.9, 1.8, 0.84, 1.6),
    row(
        WaveguideKind::TypeII,
        Some(10.0),
        5.0,
        12.1,
        12.0,
        1.09,
        28.5,
    ),
    row(
        WaveguideKind::TypeII,
        Some(12.5),
        6.1,
        12.5,
        7.0,
        1.12,
        14.9,
    ),
    row(WaveguideKind::TypeII, Some(15.0), 7.2, 12.5, 4.3, 1.21, 7.4),
    row(WaveguideKind::TypeII, Some(17.5), 8.6, 12.0, 2.8, 1.31, 3.0),
    row(WaveguideKind::TypeII, Some(20.0), 9.9, 12.5, 2.4, 1.68, 0.9),
];

/// Recomputes every table row from its mode sizes and insertion loss.
pub fn reproduce_table1() -> Result<Vec<LossBudget>> {
    let spot = GaussianMode::circular(FOCAL_SPOT_FWHM_UM)?;
    TABLE1
        .iter()
        .map(|r| {
            LossBudget::from_measurement(
                r.kind,
                r.track_separation_um,
                GaussianMode::new(r.fwhm_h_um, r.fwhm_v_um)?,
                r.il_db,
                &spot,
                CRYSTAL_INDEX,
                CRYSTAL_LENGTH_CM,
            )
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct BudgetCsvRow {
    #[serde(rename = "type")]
    kind: WaveguideKind,
    d_um: Option<f64>,
    fwhm_h_um: f64,
    fwhm_v_um: f64,
    il_db: f64,
    cl_db: f64,
    fl_db: f64,
    pl_db_per_cm: f64,
}

/// Writes budgets with the columns
/// `type,d_um,fwhm_h_um,fwhm_v_um,il_db,cl_db,fl_db,pl_db_per_cm`.
/// `d_um` is empty for type I waveguides.
pub fn write_budget_csv<W: Write>(out: W, budgets: &[LossBudget]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for b in budgets {
        w.serialize(BudgetCsvRow {
            kind: b.kind,
            d_um: b.track_separation_um,
            fwhm_h_um: b.mode.fwhm_h,
            fwhm_v_um: b.mode.fwhm_v,
            il_db: round_to(b.insertion_db, 4),
            cl_db: round_to(b.coupling_db, 4),
            fl_db: round_to(b.fresnel_db, 4),
            pl_db_per_cm: round_to(b.propagation_db_per_cm, 4),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads budgets written by [`write_budget_csv`]; lines starting with `#`
/// are comments.
pub fn read_budget_csv<R: Read>(input: R, crystal_length_cm: f64) -> Result<Vec<LossBudget>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let expected = [
        "type",
        "d_um",
        "fwhm_h_um",
        "fwhm_v_um",
        "il_db",
        "cl_db",
        "fl_db",
        "pl_db_per_cm",
    ];
    let headers = r.headers()?.clone();
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Format(format!(
            "loss-budget columns must be exactly {}",
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let row: BudgetCsvRow = rec?;
        let b = LossBudget {
            kind: row.kind,
            insertion_db: row.il_db,
            coupling_db: row.cl_db,
            fresnel_db: row.fl_db,
            propagation_db_per_cm: row.pl_db_per_cm,
            crystal_length_cm,
            mode: GaussianMode::new(row.fwhm_h_um, row.fwhm_v_um)?,
            track_separation_um: row.d_um,
        };
        b.validate()?;
        out.push(b);
    }
    Ok(out)
}

fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

/// Excess loss of a curved section of radius `radius_mm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendMeasurement {
    pub radius_mm: f64,
    pub excess_loss_db: f64,
    pub s_band_length_mm: f64,
}

/// `BL(R) = amplitude · exp(-R / decay_radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendFit {
    pub amplitude_db: f64,
    /// Infinite when the data are flat.
    pub decay_radius_mm: f64,
    /// Root-mean-square residual, dB.
    pub residual_db: f64,
}

impl BendFit {
    pub fn eval(&self, radius_mm: f64) -> f64 {
        if self.decay_radius_mm.is_infinite() {
            self.amplitude_db
        } else {
            self.amplitude_db * (-radius_mm / self.decay_radius_mm).exp()
        }
    }
}

/// Least-squares single-exponential fit of bending loss against radius.
pub fn fit_bending_loss(points: &[BendMeasurement]) -> Result<BendFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "bending-loss fit needs at least 3 radii, got {}",
            points.len()
        )));
    }
    for p in points {
        if !(p.radius_mm > 0.0) || p.excess_loss_db < 0.0 {
            return domain("bend radii must be positive and losses non-negative");
        }
    }
    let mut radii: Vec<f64> = points.iter().map(|p| p.radius_mm).collect();
    radii.sort_by(f64::total_cmp);
    if radii.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Fit("bend radii must be distinct".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.radius_mm).collect();
    let y: Vec<f64> = points.iter().map(|p| p.excess_loss_db).collect();
    let (amplitude_db, decay_radius_mm, rss) = fit::fit_exp_projected(&x, &y)?;
    Ok(BendFit {
        amplitude_db,
        decay_radius_mm,
        residual_db: (rss / points.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(l: f64, f: f64, d: f64) -> FocusingSetup {
        FocusingSetup {
            wavelength_nm: l,
            focal_length_mm: f,
            beam_diameter_mm: d,
        }
    }

    #[test]
    fn focal_spot_values() {
        let s = focal_spot_fwhm(&setup(633.0, 75.0, 6.0)).unwrap();
        assert!((s - 5.94).abs() < 0.01, "{s}");
        let s606 = focal_spot_fwhm(&setup(606.0, 75.0, 6.0)).unwrap();
        assert!((s606 - 5.69).abs() < 0.01, "{s606}");
        let big = focal_spot_fwhm(&setup(633.0, 75.0, 60.0)).unwrap();
        assert!((s / big - 10.0).abs() < 1e-12);
    }

    #[test]
    fn focal_spot_rejects_non_positive() {
        assert!(matches!(
            focal_spot_fwhm(&setup(633.0, 0.0, 6.0)),
            Err(Error::Domain(_))
        ));
        assert!(focal_spot_fwhm(&setup(-1.0, 75.0, 6.0)).is_err());
    }

    #[test]
    fn mode_rejects_bad_widths() {
        assert!(GaussianMode::new(0.0, 1.0).is_err());
        assert!(GaussianMode::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn identical_modes_couple_fully() {
        let m = GaussianMode::new(4.0, 7.0).unwrap();
        assert!((overlap_efficiency(&m, &m) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn type_one_coupling_loss() {
        let spot = GaussianMode::circular(5.9).unwrap();
        let wg = GaussianMode::new(3.1, 5.9).unwrap();
        let eta = overlap_efficiency(&wg, &spot);
        assert!((eta - 0.8235).abs() < 1e-4, "{eta}");
        assert!((loss_db(eta) - 0.84).abs() < 0.01);
    }

    #[test]
    fn fresnel_values() {
        assert!((fresnel_loss_db(1.8).unwrap() - 0.37).abs() < 0.005);
        assert_eq!(fresnel_loss_db(1.0).unwrap(), 0.0);
        assert!((fresnel_loss_db(1.5).unwrap() - 0.177).abs() < 0.001);
        assert!(fresnel_loss_db(0.0).is_err());
        assert!(fresnel_loss_db(-1.2).is_err());
    }

    #[test]
    fn propagation_values() {
        let pl = propagation_loss(1.8, 0.84, 0.37, 0.37).unwrap();
        assert!((pl - 1.6).abs() < 0.01, "{pl}");
        let pl = propagation_loss(12.0, 1.09, 0.37, 0.37).unwrap();
        assert!((pl - 28.5).abs() < 0.05, "{pl}");
        assert_eq!(propagation_loss(1.21, 0.84, 0.37, 0.37).unwrap(), 0.0);
        assert!(matches!(
            propagation_loss(1.0, 0.84, 0.37, 0.37),
            Err(Error::Inconsistent(_))
        ));
        assert!(propagation_loss(1.8, 0.84, 0.37, 0.0).is_err());
    }

    #[test]
    fn bending_round_trip() {
        let pts: Vec<_> = [30.0, 50.0, 90.0]
            .iter()
            .map(|&r| BendMeasurement {
                radius_mm: r,
                excess_loss_db: 5.0 * (-r / 20.0_f64).exp(),
                s_band_length_mm: 7.0,
            })
            .collect();
        let f = fit_bending_loss(&pts).unwrap();
        assert!((f.amplitude_db - 5.0).abs() < 1e-6, "{f:?}");
        assert!((f.decay_radius_mm - 20.0).abs() < 1e-6, "{f:?}");
        let mut prev = f64::INFINITY;
        for r in (30..=90).map(f64::from) {
            let v = f.eval(r);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn bending_zero_and_degenerate() {
        let z: Vec<_> = [30.0, 50.0, 90.0]
            .iter()
            .map(|&r| BendMeasurement {
                radius_mm: r,
                excess_loss_db: 0.0,
                s_band_length_mm: 7.0,
            })
            .collect();
        assert_eq!(fit_bending_loss(&z).unwrap().amplitude_db, 0.0);
        let mut dup = z.clone();
        dup[1].radius_mm = 30.0;
        assert!(fit_bending_loss(&dup).is_err());
        assert!(fit_bending_loss(&z[..2]).is_err());
    }

    #[test]
    fn budget_csv_round_trip() {
        let budgets = reproduce_table1().unwrap();
        let mut buf = Vec::new();
        write_budget_csv(&mut buf, &budgets).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("type,d_um,fwhm_h_um,fwhm_v_um,il_db,cl_db,fl_db,pl_db_per_cm\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("I,,3.1,5.9,"));
        let back = read_budget_csv(buf.as_slice(), CRYSTAL_LENGTH_CM).unwrap();
        assert_eq!(back.len(), 6);
        for (a, b) in budgets.iter().zip(&back) {
            assert!((a.coupling_db - b.coupling_db).abs() < 1e-4);
            assert_eq!(a.track_separation_um, b.track_separation_um);
        }
    }

    #[test]
    fn budget_csv_rejects_wrong_columns() {
        let bad = "type,d,fwhm_h_um,fwhm_v_um,il_db,cl_db,fl_db,pl_db_per_cm\n";
        assert!(matches!(
            read_budget_csv(bad.as_bytes(), 0.37),
            Err(Error::Format(_))
        ));
    }
}
