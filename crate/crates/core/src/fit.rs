//! Small least-squares toolkit shared by the loss, coherence and memory fits.
//!
//! Everything here is closed form or one-dimensional: straight lines,
//! single exponentials (log-linear, or variable projection when zeros are
//! present) and tiny dense linear systems.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-sided confidence level used for every reported interval.
pub const CONFIDENCE: f64 = 0.95;

/// Straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_sigma: f64,
    pub intercept_sigma: f64,
    pub dof: usize,
    pub rss: f64,
}

/// Estimate with a confidence interval. `unbounded` marks estimates whose
/// upper limit diverges (a decay time whose rate is consistent with zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub unbounded: bool,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.ci_low && x <= self.ci_high
    }
}

/// Student-t quantile for the two-sided [`CONFIDENCE`] level.
pub fn t_quantile(dof: usize) -> f64 {
    if dof == 0 {
        return f64::INFINITY;
    }
    let p = 0.5 + CONFIDENCE / 2.0;
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(p))
        .unwrap_or(f64::INFINITY)
}

fn check_xy(x: &[f64], y: &[f64], min_points: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!(
            "length mismatch: {} abscissae, {} ordinates",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_points {
        return Err(Error::Fit(format!(
            "need at least {min_points} points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    Ok(())
}

fn distinct_count(x: &[f64]) -> usize {
    let mut v: Vec<f64> = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v.len()
}

/// Weighted least-squares line. With `weights = None` all points count
/// equally and the parameter errors are scaled by the residual variance.
/// With explicit weights (`1/σ²`) the errors follow from the weights alone.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    check_xy(x, y, 2)?;
    if distinct_count(x) < 2 {
        return Err(Error::Fit("abscissae are degenerate".into()));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == x.len() => w.to_vec(),
        Some(_) => return Err(Error::Fit("weight length mismatch".into())),
        None => vec![1.0; x.len()],
    };
    if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) {
        return Err(Error::Fit("weights must be positive".into()));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(xi, wi)| xi * wi).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(yi, wi)| yi * wi).sum::<f64>() / sw;
    let sxx: f64 = x
        .iter()
        .zip(&w)
        .map(|(xi, wi)| wi * (xi - mx).powi(2))
        .sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((xi, yi), wi)| wi * (xi - mx) * (yi - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((xi, yi), wi)| wi * (yi - intercept - slope * xi).powi(2))
        .sum();
    let dof = x.len() - 2;
    let scale = match weights {
        Some(_) => 1.0,
        None if dof > 0 => rss / dof as f64,
        None => 0.0,
    };
    let slope_sigma = (scale / sxx).sqrt();
    let intercept_sigma = (scale * (1.0 / sw + mx * mx / sxx)).sqrt();
    Ok(LineFit {
        slope,
        intercept,
        slope_sigma,
        intercept_sigma,
        dof,
        rss,
    })
}

/// Least-squares slope of a line constrained through the origin, with its
/// standard error (zero when fewer than two points).
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_xy(x, y, 1)?;
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("all abscissae are zero".into()));
    }
    let slope = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let n = x.len();
    let sigma = if n > 1 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
        (rss / (n - 1) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, sigma))
}

/// Single-exponential fit `y = amplitude * exp(-rate * x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    pub rate: f64,
    pub rate_sigma: f64,
    pub dof: usize,
    /// Root-mean-square residual in the original (linear) units.
    pub residual_rms: f64,
}

impl ExpFit {
    /// Converts the rate into a time constant `T` for the parameterisation
    /// `exp(-factor * x / T)`, e.g. `factor = 4` for echo intensities.
    pub fn time_constant(&self, factor: f64) -> Estimate {
        let rate_is_zero = self.rate <= 1e-12;
        let t = t_quantile(self.dof);
        let half = t * self.rate_sigma;
        let value = if rate_is_zero {
            f64::INFINITY
        } else {
            factor / self.rate
        };
        let rate_high = self.rate + half;
        let rate_low = self.rate - half;
        let ci_low = if rate_high > 0.0 {
            factor / rate_high
        } else {
            f64::INFINITY
        };
        let unbounded = rate_is_zero || rate_low <= 0.0;
        let ci_high = if unbounded {
            f64::INFINITY
        } else {
            factor / rate_low
        };
        Estimate {
            value,
            ci_low: ci_low.min(value),
            ci_high: ci_high.max(value),
            unbounded,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (-self.rate * x).exp()
    }
}

/// Log-linear least-squares exponential fit. Requires strictly positive
/// ordinates and at least `min_points` distinct abscissae (at least 2).
pub fn fit_exp_decay(x: &[f64], y: &[f64], min_points: usize) -> Result<ExpFit> {
    check_xy(x, y, min_points.max(2))?;
    if y.iter().any(|&v| v <= 0.0) {
        return Err(Error::Fit(
            "exponential fit requires strictly positive values".into(),
        ));
    }
    if distinct_count(x) < min_points.max(2) {
        return Err(Error::Fit("abscissae must be distinct".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let line = fit_line(x, &ly, None)?;
    let amplitude = line.intercept.exp();
    let rate = -line.slope;
    let residual_rms = (x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - amplitude * (-rate * xi).exp()).powi(2))
        .sum::<f64>()
        / x.len() as f64)
        .sqrt();
    Ok(ExpFit {
        amplitude,
        amplitude_sigma: amplitude * line.intercept_sigma,
        rate,
        rate_sigma: line.slope_sigma,
        dof: line.dof,
        residual_rms,
    })
}

/// Unweighted least squares for `y = A exp(-x / L)` in linear units, valid
/// for data containing zeros. The amplitude is eliminated analytically and
/// the decay length is found by a logarithmic scan followed by golden
/// section refinement. Returns `(A, L, rss)`; `L` is infinite when the
/// optimum is a constant and zero amplitude data gives `A = 0`.
pub fn fit_exp_projected(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    check_xy(x, y, 2)?;
    if distinct_count(x) < 2 {
        return Err(Error::Fit("abscissae are degenerate".into()));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Ok((0.0, f64::INFINITY, 0.0));
    }
    let amp_for = |k: f64| -> (f64, f64) {
        let num: f64 = x.iter().zip(y).map(|(xi, yi)| yi * (-k * xi).exp()).sum();
        let den: f64 = x.iter().map(|xi| (-2.0 * k * xi).exp()).sum();
        let a = num / den;
        let rss = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - a * (-k * xi).exp()).powi(2))
            .sum();
        (a, rss)
    };
    let xmax = x.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let xmin = x
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(xmax);
    let lo = (1e-6 / xmax).ln();
    let hi = (60.0 / xmin).ln();
    let steps = 400;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let lk = lo + (hi - lo) * i as f64 / steps as f64;
        let (_, rss) = amp_for(lk.exp());
        if rss < best.1 {
            best = (lk, rss);
        }
    }
    let h = (hi - lo) / steps as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = amp_for(c.exp()).1;
    let mut fd = amp_for(d.exp()).1;
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = amp_for(c.exp()).1;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = amp_for(d.exp()).1;
        }
    }
    let mut k = (0.5 * (a + b)).exp();
    let (mut amp, mut rss) = amp_for(k);
    // Gauss-Newton polish; the golden search only pins k to sqrt(eps).
    for _ in 0..20 {
        let (mut jtj, mut jtr) = ([0.0; 4], [0.0; 2]);
        for (xi, yi) in x.iter().zip(y) {
            let e = (-k * xi).exp();
            let r = yi - amp * e;
            let j = [e, -amp * xi * e];
            for p in 0..2 {
                jtr[p] += j[p] * r;
                for q in 0..2 {
                    jtj[p * 2 + q] += j[p] * j[q];
                }
            }
        }
        let Ok(step) = solve_dense(jtj.to_vec(), jtr.to_vec()) else {
            break;
        };
        let (na, nk) = (amp + step[0], k + step[1]);
        if !(nk > 0.0) {
            break;
        }
        let nrss: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - na * (-nk * xi).exp()).powi(2))
            .sum();
        if nrss > rss {
            break;
        }
        amp = na;
        k = nk;
        rss = nrss;
    }
    // Constant data drives the rate to the bottom of the bracket.
    let length = if k.ln() <= lo + h {
        f64::INFINITY
    } else {
        1.0 / k
    };
    Ok((amp, length, rss))
}

/// Solves a small dense system `A x = b` by Gaussian elimination with
/// partial pivoting. `a` is row-major `n x n`.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::Fit("matrix shape mismatch".into()));
    }
    let norm = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if a[piv * n + col].abs() <= 1e-13 * norm.max(1e-300) {
            return Err(Error::Fit("singular normal equations".into()));
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_recovers_exact_coefficients() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y, None).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 2.0).abs() < 1e-12);
        assert!(f.slope_sigma < 1e-12);
    }

    #[test]
    fn line_rejects_degenerate_abscissae() {
        assert!(fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], None).is_err());
    }

    #[test]
    fn exp_decay_exact() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * (-v / 5.0).exp()).collect();
        let f = fit_exp_decay(&x, &y, 3).unwrap();
        assert!((f.amplitude - 3.0).abs() < 1e-12);
        let t = f.time_constant(1.0);
        assert!((t.value - 5.0).abs() < 1e-10);
        assert!(!t.unbounded);
    }

    #[test]
    fn constant_data_is_unbounded() {
        let f = fit_exp_decay(&[1.0, 2.0, 3.0], &[0.2, 0.2, 0.2], 3).unwrap();
        let t = f.time_constant(4.0);
        assert!(t.unbounded);
        assert!(t.value.is_infinite());
    }

    #[test]
    fn exp_decay_rejects_non_positive() {
        assert!(fit_exp_decay(&[1.0, 2.0, 3.0], &[0.2, 0.0, 0.1], 3).is_err());
    }

    #[test]
    fn projected_fit_handles_zeros_and_exact_data() {
        let (a, l, _) = fit_exp_projected(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert_eq!(a, 0.0);
        assert!(l.is_infinite());
        let x = [30.0, 50.0, 90.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 5.0 * (-v / 20.0).exp()).collect();
        let (a, l, _) = fit_exp_projected(&x, &y).unwrap();
        assert!((a - 5.0).abs() < 1e-6, "{a}");
        assert!((l - 20.0).abs() < 1e-6, "{l}");
    }

    #[test]
    fn dense_solver() {
        let x = solve_dense(vec![2.0, 1.0, 1.0, 3.0], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve_dense(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn t_quantile_large_dof_tends_to_normal() {
        assert!((t_quantile(100_000) - 1.95996).abs() < 1e-3);
        assert!((t_quantile(1) - 12.706).abs() < 1e-2);
    }
}
