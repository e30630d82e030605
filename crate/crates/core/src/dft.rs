//! Centred discrete Fourier transforms. Index `N/2` is the zero of both
//! axes. The forward transform carries `e^{-i2πνt}`, the inverse carries
//! `e^{+i2πνt}` and neither is normalised.

use num_complex::Complex64;
use rustfft::FftPlanner;

fn transform(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = input.to_vec();
    buf.rotate_left(n / 2);
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    fft.process(&mut buf);
    buf.rotate_right(n / 2);
    buf
}

pub fn centered_forward(input: &[Complex64]) -> Vec<Complex64> {
    transform(input, false)
}

pub fn centered_inverse(input: &[Complex64]) -> Vec<Complex64> {
    transform(input, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum() {
        let n = 12;
        let x: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let fast = centered_forward(&x);
        for (j, fj) in fast.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, xm) in x.iter().enumerate() {
                let ph =
                    -2.0 * std::f64::consts::PI * (j as f64 - 6.0) * (m as f64 - 6.0) / n as f64;
                acc += xm * Complex64::from_polar(1.0, ph);
            }
            assert!((acc - fj).norm() < 1e-9);
        }
        let back = centered_inverse(&fast);
        for (a, b) in back.iter().zip(&x) {
            assert!((a / n as f64 - b).norm() < 1e-12);
        }
    }
}
