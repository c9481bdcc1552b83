//! Truncated Fourier series of a sampled periodic signal.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::Waveform;
use crate::pinn::features::sin_cos_pi;

/// `mean + Σ_k a_k cos(2πk t/T) + b_k sin(2πk t/T)`, `k = 1..=order`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSeries {
    pub period: f64,
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl PeriodicSeries {
    /// Least-squares fit to samples taken at `t_i = i / rate`.
    pub fn fit(samples: &[f64], rate: f64, period: f64, order: usize) -> Result<Self> {
        let n = samples.len();
        let cols = 2 * order + 1;
        if n < cols {
            return Err(Error::TooShort(format!(
                "{n} samples cannot determine {cols} Fourier coefficients"
            )));
        }
        let basis = DMatrix::from_fn(n, cols, |i, c| {
            let t = i as f64 / rate;
            if c == 0 {
                1.0
            } else {
                let k = c.div_ceil(2) as f64;
                let ph = 2.0 * PI * k * t / period;
                if c % 2 == 1 {
                    ph.cos()
                } else {
                    ph.sin()
                }
            }
        });
        let rhs = DVector::from_column_slice(samples);
        let coef = basis
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Analysis(format!("Fourier fit failed: {e}")))?;
        Ok(Self {
            period,
            mean: coef[0],
            cos: (0..order).map(|k| coef[2 * k + 1]).collect(),
            sin: (0..order).map(|k| coef[2 * k + 2]).collect(),
        })
    }

    pub fn from_waveform(w: &Waveform, order: usize) -> Result<Self> {
        Self::fit(&w.samples, w.rate, w.period, order)
    }

    pub fn order(&self) -> usize {
        self.cos.len()
    }

    /// Value and first two time derivatives at `t` seconds.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let mut out = [self.mean, 0.0, 0.0];
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let w = 2.0 * PI * (k + 1) as f64 / self.period;
            let (s, c) = (w * t).sin_cos();
            out[0] += a * c + b * s;
            out[1] += w * (b * c - a * s);
            out[2] -= w * w * (a * c + b * s);
        }
        out
    }

    /// As [`eval`](Self::eval) at normalized time `t* = 2t/T - 1`, exactly
    /// periodic in `t*` with period 2.
    pub fn eval_normalized(&self, t_star: f64) -> [f64; 3] {
        let mut out = [self.mean, 0.0, 0.0];
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let k = (k + 1) as f64;
            let w = 2.0 * PI * k / self.period;
            let (s, c) = sin_cos_pi(k * (t_star + 1.0));
            out[0] += a * c + b * s;
            out[1] += w * (b * c - a * s);
            out[2] -= w * w * (a * c + b * s);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_band_limited_signal() {
        let period = 5e-3;
        let rate = 40_000.0;
        let n = (period * rate) as usize;
        let f = |t: f64| {
            let w = 2.0 * PI / period;
            3.0 + 2.0 * (w * t).cos() - 0.5 * (3.0 * w * t).sin()
        };
        let samples: Vec<f64> = (0..n).map(|i| f(i as f64 / rate)).collect();
        let s = PeriodicSeries::fit(&samples, rate, period, 4).unwrap();
        assert!((s.mean - 3.0).abs() < 1e-12);
        assert!((s.cos[0] - 2.0).abs() < 1e-12);
        assert!((s.sin[2] + 0.5).abs() < 1e-12);
        for &t in &[0.0, 1.3e-3, 4.9e-3] {
            assert!((s.eval(t)[0] - f(t)).abs() < 1e-11);
        }
        let h = 1e-7;
        let t = 2.2e-3;
        let d1 = (s.eval(t + h)[0] - s.eval(t - h)[0]) / (2.0 * h);
        assert!((s.eval(t)[1] - d1).abs() < 1e-5 * d1.abs().max(1.0));
        assert_eq!(s.eval_normalized(-1.0), s.eval_normalized(1.0));
        let a = s.eval_normalized(2.0 * t / period - 1.0);
        let b = s.eval(t);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-9 * b[i].abs().max(1.0));
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(PeriodicSeries::fit(&[1.0, 2.0], 10.0, 0.2, 2).is_err());
    }
}
