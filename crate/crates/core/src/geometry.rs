//! Vocal-tract area function.
//!
//! Sampled areas are joined by a shape-preserving piecewise cubic Hermite
//! interpolant (Fritsch–Carlson slopes with the weighted harmonic mean at
//! interior knots and the one-sided three-point rule at the ends). The
//! cross-section is taken to be circular, so the circumference follows
//! from the area.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AreaFunction {
    knots: Vec<f64>,
    areas: Vec<f64>,
    slopes: Vec<f64>,
    length: f64,
}

impl AreaFunction {
    /// Builds the interpolant from `(position m, area m²)` samples covering `[0, length]`.
    pub fn new(samples: &[(f64, f64)], length: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Geometry("need at least two samples".into()));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Geometry(format!("tract length {length} must be positive")));
        }
        let knots: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let areas: Vec<f64> = samples.iter().map(|s| s.1).collect();
        for w in knots.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Geometry(format!(
                    "positions must be strictly ascending ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let tol = 1e-9 * length;
        if knots[0].abs() > tol || (knots[knots.len() - 1] - length).abs() > tol {
            return Err(Error::Geometry(format!(
                "samples must span [0, {length}], got [{}, {}]",
                knots[0],
                knots[knots.len() - 1]
            )));
        }
        if let Some(a) = areas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Geometry(format!("area {a} is not positive")));
        }
        let mut knots = knots;
        knots[0] = 0.0;
        *knots.last_mut().unwrap() = length;
        let slopes = pchip_slopes(&knots, &areas);
        Ok(Self {
            knots,
            areas,
            slopes,
            length,
        })
    }

    /// Reads a two-column text table: position (m) and area (m²) per line.
    /// Blank lines and `#` comments are ignored.
    pub fn from_table_file(path: impl AsRef<Path>, length: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(&parse_area_table(&text)?, length)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Area A(x) and circumference S(x) of the circular section at `x`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        if !(0.0..=self.length).contains(&x) {
            return Err(Error::OutOfRange { x, l: self.length });
        }
        let a = self.area_unchecked(x);
        Ok((a, circumference(a)))
    }

    /// Area at `x`, clamping `x` into the tract.
    pub fn area(&self, x: f64) -> f64 {
        self.area_unchecked(x.clamp(0.0, self.length))
    }

    /// First derivative dA/dx, taking the right-hand interval at knots.
    pub fn area_slope(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.length);
        let k = self.interval(x);
        let (h, s) = self.local(k, x);
        let (y0, y1, d0, d1) = self.segment(k);
        // derivative of the Hermite form in local coordinate s
        let dh00 = 6.0 * s * s - 6.0 * s;
        let dh10 = 3.0 * s * s - 4.0 * s + 1.0;
        let dh11 = 3.0 * s * s - 2.0 * s;
        dh00 * (y0 - y1) / h + dh10 * d0 + dh11 * d1
    }

    pub fn entrance_area(&self) -> f64 {
        self.areas[0]
    }

    pub fn lip_area(&self) -> f64 {
        *self.areas.last().unwrap()
    }

    fn area_unchecked(&self, x: f64) -> f64 {
        let k = self.interval(x);
        let (h, s) = self.local(k, x);
        let (y0, y1, d0, d1) = self.segment(k);
        if s == 0.0 {
            return y0;
        }
        if s == 1.0 {
            return y1;
        }
        let s2 = s * s;
        let s3 = s2 * s;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        y0 + h01 * (y1 - y0) + h * (h10 * d0 + h11 * d1)
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.knots.len();
        match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&x).expect("finite knots"))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn local(&self, k: usize, x: f64) -> (f64, f64) {
        let h = self.knots[k + 1] - self.knots[k];
        (h, (x - self.knots[k]) / h)
    }

    fn segment(&self, k: usize) -> (f64, f64, f64, f64) {
        (
            self.areas[k],
            self.areas[k + 1],
            self.slopes[k],
            self.slopes[k + 1],
        )
    }
}

/// Circumference of a circle of area `a`.
pub fn circumference(a: f64) -> f64 {
    2.0 * (PI * a).sqrt()
}

pub fn parse_area_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty());
        let mut next = |what: &str| -> Result<f64> {
            cols.next()
                .ok_or_else(|| Error::Format(format!("line {}: missing {what}", lineno + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {what}: {e}", lineno + 1)))
        };
        let x = next("position")?;
        let a = next("area")?;
        out.push((x, a));
    }
    Ok(out)
}

/// Knot slopes of the monotone cubic Hermite interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constriction() -> AreaFunction {
        AreaFunction::new(
            &[
                (0.0, 2.0e-4),
                (0.03, 1.0e-4),
                (0.07, 0.3e-4),
                (0.11, 4.0e-4),
                (0.16, 3.0e-4),
            ],
            0.16,
        )
        .unwrap()
    }

    #[test]
    fn constant_data_gives_constant_area() {
        let af = AreaFunction::new(&[(0.0, 1e-4), (0.16, 1e-4)], 0.16).unwrap();
        for i in 0..=50 {
            let (a, _) = af.eval(0.16 * i as f64 / 50.0).unwrap();
            assert_eq!(a, 1e-4);
        }
    }

    #[test]
    fn unit_circle_circumference() {
        assert!((circumference(PI) - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn knots_are_reproduced_exactly() {
        let af = constriction();
        for (x, a) in af.knots().iter().zip(af.knot_areas()) {
            assert_eq!(af.eval(*x).unwrap().0, *a);
        }
    }

    #[test]
    fn mid_interval_matches_hand_hermite() {
        let af = constriction();
        // interval [0.03, 0.07], evaluate at s = 0.25
        let (x0, x1) = (0.03, 0.07);
        let (y0, y1) = (1.0e-4, 0.3e-4);
        let h = x1 - x0;
        // interior slopes from the weighted harmonic mean, written out by hand
        let d_prev = (1.0e-4 - 2.0e-4) / 0.03;
        let d_here = (y1 - y0) / h;
        let d_next = (4.0e-4 - 0.3e-4) / 0.04;
        let w1 = 2.0 * h + 0.03;
        let w2 = h + 2.0 * 0.03;
        let m0 = (w1 + w2) / (w1 / d_prev + w2 / d_here);
        let m1 = 0.0; // sign change at the constriction
        assert!(d_here * d_next < 0.0);
        let s: f64 = 0.25;
        let expected = (2.0 * s.powi(3) - 3.0 * s * s + 1.0) * y0
            + (s.powi(3) - 2.0 * s * s + s) * h * m0
            + (-2.0 * s.powi(3) + 3.0 * s * s) * y1
            + (s.powi(3) - s * s) * h * m1;
        let got = af.eval(x0 + s * h).unwrap().0;
        assert!((got - expected).abs() < 1e-18, "{got} vs {expected}");
    }

    #[test]
    fn monotone_data_gives_monotone_interpolant() {
        let af = AreaFunction::new(
            &[(0.0, 0.5e-4), (0.02, 0.6e-4), (0.05, 2.0e-4), (0.1, 2.1e-4), (0.16, 6e-4)],
            0.16,
        )
        .unwrap();
        let dense: Vec<f64> = (0..=4000).map(|i| af.area(0.16 * i as f64 / 4000.0)).collect();
        let mut sorted = dense.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(dense, sorted);
    }

    #[test]
    fn constriction_has_no_undershoot() {
        let af = constriction();
        let min_sample = af.knot_areas().iter().cloned().fold(f64::INFINITY, f64::min);
        let min_dense = (0..=8000)
            .map(|i| af.area(0.16 * i as f64 / 8000.0))
            .fold(f64::INFINITY, f64::min);
        assert!(min_dense >= min_sample);
    }

    #[test]
    fn first_derivative_is_continuous_at_knots() {
        let af = constriction();
        for (k, &x) in af.knots().iter().enumerate().skip(1).take(3) {
            let eps = 1e-9;
            let left = (af.area(x) - af.area(x - eps)) / eps;
            let right = (af.area(x + eps) - af.area(x)) / eps;
            let scale = af.slopes()[k].abs().max(1e-3);
            assert!((left - right).abs() / scale < 1e-4, "knot {k}: {left} vs {right}");
            assert!((af.area_slope(x) - af.slopes()[k]).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(AreaFunction::new(&[(0.0, 1e-4)], 0.16).is_err());
        assert!(AreaFunction::new(&[(0.0, 1e-4), (0.0, 1e-4), (0.16, 1e-4)], 0.16).is_err());
        assert!(AreaFunction::new(&[(0.0, 1e-4), (0.1, 0.0), (0.16, 1e-4)], 0.16).is_err());
        assert!(AreaFunction::new(&[(0.01, 1e-4), (0.16, 1e-4)], 0.16).is_err());
        assert!(AreaFunction::new(&[(0.0, 1e-4), (0.15, 1e-4)], 0.16).is_err());
        let af = constriction();
        assert!(matches!(af.eval(0.17), Err(Error::OutOfRange { .. })));
        assert!(af.eval(-1e-6).is_err());
    }

    #[test]
    fn table_parsing() {
        let rows = parse_area_table("# x area\n0.0 1e-4\n\n0.16, 2e-4 # lips\n").unwrap();
        assert_eq!(rows, vec![(0.0, 1e-4), (0.16, 2e-4)]);
        assert!(parse_area_table("0.0\n").is_err());
    }
}
