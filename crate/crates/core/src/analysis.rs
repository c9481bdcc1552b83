//! Spectra, LPC formants and error metrics.
//!
//! Magnitudes are reported in dB relative to the largest bin, so the peak
//! bin reads 0 dB and an all-zero input is rejected.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::io::Table;

/// Pole radius below which a root is not counted as a formant.
pub const POLE_RADIUS_MIN: f64 = 0.7;

/// One-sided magnitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin centres, Hz, ascending from 0.
    pub freq: Vec<f64>,
    /// Magnitude in dB re the largest bin.
    pub db: Vec<f64>,
    /// Linear magnitude `|X_k| / n`, doubled for bins that fold a negative twin.
    pub amplitude: Vec<f64>,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.freq.get(1).copied().unwrap_or(0.0)
    }

    /// Frequencies of local maxima within `floor_db` of the top, ascending.
    pub fn peaks(&self, floor_db: f64) -> Vec<f64> {
        let n = self.db.len();
        (1..n.saturating_sub(1))
            .filter(|&k| {
                self.db[k] > self.db[k - 1] && self.db[k] >= self.db[k + 1] && self.db[k] >= floor_db
            })
            .map(|k| self.freq[k])
            .collect()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        t.push("freq_hz", self.freq.clone());
        t.push("magnitude_db", self.db.clone());
        t
    }
}

/// DFT magnitude of `series` taken as one period of a periodic signal.
pub fn spectrum(series: &[f64], rate: f64) -> Result<Spectrum> {
    let n = series.len();
    if n < 64 {
        return Err(Error::Analysis(format!("need at least 64 samples, got {n}")));
    }
    if !(rate > 0.0) {
        return Err(Error::Analysis(format!("sample rate {rate} must be positive")));
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let amplitude: Vec<f64> = (0..=half)
        .map(|k| {
            let folded = k != 0 && !(n % 2 == 0 && k == half);
            let a = buf[k].norm() / n as f64;
            if folded {
                2.0 * a
            } else {
                a
            }
        })
        .collect();
    let top = amplitude.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::Analysis("signal is identically zero".into()));
    }
    let db = amplitude
        .iter()
        .map(|&a| {
            let r = a / top;
            // clamp so silent bins stay finite
            20.0 * r.max(1e-15).log10()
        })
        .collect();
    let freq = (0..=half).map(|k| k as f64 * rate / n as f64).collect();
    Ok(Spectrum {
        freq,
        db,
        amplitude,
    })
}

/// Linear-prediction coefficients `a_1..a_p` of `x_n ≈ -sum a_k x_(n-k)`
/// from autocorrelation lags `r_0..r_p` (Levinson-Durbin).
pub fn levinson(r: &[f64]) -> Result<Vec<f64>> {
    let order = r.len() - 1;
    if !(r[0] > 0.0) {
        return Err(Error::Lpc("zero-lag autocorrelation must be positive".into()));
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let k = -acc / err;
        if !(k.abs() < 1.0) {
            return Err(Error::Lpc(format!(
                "reflection coefficient {k:.6} at order {i}: autocorrelation not positive definite"
            )));
        }
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
    }
    Ok(a[1..].to_vec())
}

/// Roots of `1 + a_1 z^-1 + ... + a_p z^-p` as (radius, angle) pairs.
pub fn lpc_poles(a: &[f64]) -> Vec<(f64, f64)> {
    let p = a.len();
    if p == 0 {
        return vec![];
    }
    // companion matrix of z^p + a_1 z^(p-1) + ... + a_p
    let mut m = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        m[(0, j)] = -a[j];
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| (z.norm(), z.im.atan2(z.re)))
        .collect()
}

/// Formant frequencies from autocorrelation-method LPC of `series`.
///
/// The series is Hamming-windowed before the autocorrelation. Every
/// complex pole in the upper half plane with radius above
/// [`POLE_RADIUS_MIN`] yields one formant at `angle * rate / 2 pi`.
pub fn lpc_formants(series: &[f64], rate: f64, order: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if order == 0 || 2 * order >= n {
        return Err(Error::Lpc(format!(
            "order {order} needs more than {} samples, got {n}",
            2 * order
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let w: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - mean) * hamming(i, n))
        .collect();
    let r: Vec<f64> = (0..=order)
        .map(|k| (0..n - k).map(|i| w[i] * w[i + k]).sum())
        .collect();
    let a = levinson(&r)?;
    Ok(formants_from_poles(&lpc_poles(&a), rate))
}

fn formants_from_poles(poles: &[(f64, f64)], rate: f64) -> Vec<f64> {
    let mut f: Vec<f64> = poles
        .iter()
        .filter(|(r, th)| *r > POLE_RADIUS_MIN && *th > 1e-9 && *th < PI - 1e-9)
        .map(|(_, th)| th * rate / (2.0 * PI))
        .collect();
    f.sort_by(|a, b| a.partial_cmp(b).unwrap());
    f
}

fn hamming(i: usize, n: usize) -> f64 {
    0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
}

/// Magnitude of the all-pole envelope `1 / |A(e^{jw})|` at `freq`.
pub fn lpc_envelope(a: &[f64], rate: f64, freq: f64) -> f64 {
    let w = 2.0 * PI * freq / rate;
    let mut z = Complex::new(1.0, 0.0);
    for (k, &ak) in a.iter().enumerate() {
        z += Complex::from_polar(ak, -w * (k + 1) as f64);
    }
    1.0 / z.norm()
}

/// Trigonometric interpolation of one period, evaluated at `rate` for
/// `cycles` periods.
///
/// `cycle` samples one period on a grid whose last point repeats the
/// first; that point is dropped before the transform. Harmonics at or
/// above half of `rate` are discarded so nothing aliases.
pub fn resample_periodic(cycle: &[f64], period: f64, rate: f64, cycles: usize) -> Result<Vec<f64>> {
    let n = cycle.len().saturating_sub(1);
    if n < 4 {
        return Err(Error::Analysis("cycle needs at least five samples".into()));
    }
    let mut buf: Vec<Complex<f64>> = cycle[..n].iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nyquist = ((0.5 * rate * period).ceil() as usize).saturating_sub(1);
    let harmonics = (n / 2).min(nyquist);
    let total = (cycles as f64 * period * rate).floor() as usize;
    let out = (0..total)
        .map(|i| {
            let t = i as f64 / rate;
            let mut v = buf[0].re / n as f64;
            for (k, c) in buf.iter().enumerate().take(harmonics + 1).skip(1) {
                let scale = if 2 * k == n { 1.0 } else { 2.0 } / n as f64;
                let th = 2.0 * PI * k as f64 * t / period;
                v += scale * (c.re * th.cos() - c.im * th.sin());
            }
            v
        })
        .collect();
    Ok(out)
}

/// Formants of a periodic cycle: resample to `rate`, tile to at least
/// 50 ms, then run [`lpc_formants`].
pub fn cycle_formants(cycle: &[f64], period: f64, rate: f64, order: usize) -> Result<Vec<f64>> {
    let cycles = ((0.05 / period).ceil() as usize).max(4);
    let x = resample_periodic(cycle, period, rate, cycles)?;
    lpc_formants(&x, rate, order)
}

/// `|estimate - reference| / |reference|`.
pub fn relative_error(estimate: f64, reference: f64) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::Analysis("relative error against a zero reference".into()));
    }
    Ok((estimate - reference).abs() / reference.abs())
}
