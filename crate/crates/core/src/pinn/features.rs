//! Input scaling, periodic time features and the snake activation.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Maps `x ∈ [0, l]` and `t ∈ [0, T]` onto `[-1, 1]`.
pub fn scale_inputs(x: f64, t: f64, l: f64, period: f64) -> Result<(f64, f64)> {
    if !(0.0..=l).contains(&x) {
        return Err(Error::OutOfRange { x, l });
    }
    if !(0.0..=period).contains(&t) {
        return Err(Error::invalid("t", format!("{t} s outside [0, {period}] s")));
    }
    Ok((2.0 * x / l - 1.0, 2.0 * t / period - 1.0))
}

/// `(sin(pi u), cos(pi u))` with `u` reduced modulo 2 first.
///
/// Reducing before scaling by pi makes `u` and `u + 2k` give bit-identical
/// results, and quarter turns return exact zeros and ones.
pub fn sin_cos_pi(u: f64) -> (f64, f64) {
    let r = u.rem_euclid(2.0);
    if r == 0.0 {
        return (0.0, 1.0);
    }
    if r == 0.5 {
        return (1.0, 0.0);
    }
    if r == 1.0 {
        return (0.0, -1.0);
    }
    if r == 1.5 {
        return (-1.0, 0.0);
    }
    (PI * r).sin_cos()
}

/// Fourier features `[cos(k pi t*), sin(k pi t*)]` for `k = 1..=m`,
/// interleaved per harmonic.
pub fn fourier_features(t_star: f64, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m);
    for k in 1..=m {
        let (s, c) = sin_cos_pi(k as f64 * t_star);
        out.push(c);
        out.push(s);
    }
    out
}

/// Features with their first and second derivatives in `t*`.
pub fn fourier_features_with_derivatives(t_star: f64, m: usize) -> [Vec<f64>; 3] {
    let mut v = Vec::with_capacity(2 * m);
    let mut d1 = Vec::with_capacity(2 * m);
    let mut d2 = Vec::with_capacity(2 * m);
    for k in 1..=m {
        let w = k as f64 * PI;
        let (s, c) = sin_cos_pi(k as f64 * t_star);
        v.extend([c, s]);
        d1.extend([-w * s, w * c]);
        d2.extend([-w * w * c, -w * w * s]);
    }
    [v, d1, d2]
}

/// Snake activation `z + sin²(a z) / a`.
pub fn snake(z: f64, a: f64) -> f64 {
    let s = (a * z).sin();
    z + s * s / a
}
