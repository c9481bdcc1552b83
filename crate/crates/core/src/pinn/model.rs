//! The two networks plus the trainable scalar.

use ndarray::{concatenate, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::fourier_features_with_derivatives;
use super::network::{Network, NetworkShape};
use crate::autodiff::{Gradients, Jet2, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::params::{RunConfig, SmoothingCoefficients};

/// Which physical scalar is learned alongside the networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unknown {
    /// Oscillation period (forward analysis).
    Period,
    /// Subglottal pressure (inverse analysis).
    Pressure,
}

impl Unknown {
    pub fn name(self) -> &'static str {
        match self {
            Unknown::Period => "period",
            Unknown::Pressure => "pressure",
        }
    }
}

/// Physical magnitudes the O(1) network outputs are multiplied by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputScales {
    pub x: f64,
    pub p: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinnModel {
    /// Time features to `(x_1, x_2)`.
    pub fold: Network,
    /// `x*` and time features to `(p̃, ũ)`.
    pub tract: Network,
    pub unknown: Unknown,
    /// Period, s.
    pub period: f64,
    /// Subglottal pressure, Pa.
    pub p_s: f64,
    /// Number of Fourier harmonics of `t*`.
    pub harmonics: usize,
    pub scales: OutputScales,
    /// The trainable period is stored as `period / period_unit`.
    pub period_unit: f64,
    /// The trainable pressure is stored as `p_s / pressure_unit`.
    pub pressure_unit: f64,
    pub smoothing: SmoothingCoefficients,
    /// Tract length, m.
    pub length: f64,
}

impl PinnModel {
    /// Randomly initialized networks sized by `cfg`, seeded by `cfg.seed`.
    pub fn new(
        cfg: &RunConfig,
        smoothing: SmoothingCoefficients,
        length: f64,
        unknown: Unknown,
        period: f64,
        p_s: f64,
    ) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid("period", format!("must be > 0, got {period}")));
        }
        if !(p_s > 0.0 && p_s.is_finite()) {
            return Err(Error::invalid("p_s", format!("must be > 0, got {p_s}")));
        }
        let m = cfg.fourier_features;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let fold = Network::glorot(
            NetworkShape {
                inputs: 2 * m,
                width: cfg.fold_width,
                blocks: cfg.fold_blocks,
                outputs: 2,
            },
            cfg.snake_a,
            &mut rng,
        );
        let tract = Network::glorot(
            NetworkShape {
                inputs: 2 * m + 1,
                width: cfg.tract_width,
                blocks: cfg.tract_blocks,
                outputs: 2,
            },
            cfg.snake_a,
            &mut rng,
        );
        Ok(Self {
            fold,
            tract,
            unknown,
            period,
            p_s,
            harmonics: m,
            scales: OutputScales {
                x: cfg.x_scale,
                p: cfg.p_scale,
                u: cfg.u_scale,
            },
            period_unit: cfg.period_unit,
            pressure_unit: cfg.pressure_unit,
            smoothing,
            length,
        })
    }

    /// The learned scalar in physical units.
    pub fn unknown_value(&self) -> f64 {
        match self.unknown {
            Unknown::Period => self.period,
            Unknown::Pressure => self.p_s,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.fold.parameter_count() + self.tract.parameter_count() + 1
    }

    /// Trainable parameters in optimizer order: fold tensors, tract
    /// tensors, then the scaled unknown.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for t in self.fold.tensors.iter().chain(&self.tract.tensors) {
            out.extend(t.iter().copied());
        }
        out.push(match self.unknown {
            Unknown::Period => self.period / self.period_unit,
            Unknown::Pressure => self.p_s / self.pressure_unit,
        });
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.parameter_count());
        let mut k = 0;
        for t in self.fold.tensors.iter_mut().chain(self.tract.tensors.iter_mut()) {
            for v in t.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        match self.unknown {
            Unknown::Period => self.period = flat[k] * self.period_unit,
            Unknown::Pressure => self.p_s = flat[k] * self.pressure_unit,
        }
    }

    /// Records the parameters on `tape`, as leaves when `train` is set.
    pub(crate) fn bind<'t>(&self, tape: &'t Tape, train: bool) -> Bound<'t> {
        let (fold, tract) = if train {
            (self.fold.leaves(tape), self.tract.leaves(tape))
        } else {
            (self.fold.constants(tape), self.tract.constants(tape))
        };
        let (scaled, unit) = match self.unknown {
            Unknown::Period => (self.period / self.period_unit, self.period_unit),
            Unknown::Pressure => (self.p_s / self.pressure_unit, self.pressure_unit),
        };
        let leaf = if train {
            tape.scalar_leaf(scaled)
        } else {
            tape.scalar(scaled)
        };
        let (period, p_s) = match self.unknown {
            Unknown::Period => (leaf * unit, tape.scalar(self.p_s)),
            Unknown::Pressure => (tape.scalar(self.period), leaf * unit),
        };
        Bound {
            fold,
            tract,
            unknown: leaf,
            rate: period.recip() * 2.0,
            p_s,
            tape,
        }
    }
}

/// Model parameters recorded on one tape.
pub(crate) struct Bound<'t> {
    pub fold: Vec<Var<'t>>,
    pub tract: Vec<Var<'t>>,
    pub unknown: Var<'t>,
    /// `2 / T`, the factor converting `d/dt*` into `d/dt`.
    pub rate: Var<'t>,
    pub p_s: Var<'t>,
    pub tape: &'t Tape,
}

/// How many time derivatives a network evaluation should carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum TimeOrder {
    Value,
    First,
    Second,
}

fn feature_matrices(ts: &[f64], m: usize, order: TimeOrder) -> [Option<Array2<f64>>; 3] {
    let n = ts.len();
    let mut v = Array2::zeros((n, 2 * m));
    let mut d1 = Array2::zeros((n, 2 * m));
    let mut d2 = Array2::zeros((n, 2 * m));
    for (i, &t) in ts.iter().enumerate() {
        let [a, b, c] = fourier_features_with_derivatives(t, m);
        for j in 0..2 * m {
            v[[i, j]] = a[j];
            d1[[i, j]] = b[j];
            d2[[i, j]] = c[j];
        }
    }
    [
        Some(v),
        (order >= TimeOrder::First).then_some(d1),
        (order >= TimeOrder::Second).then_some(d2),
    ]
}

impl<'t> Bound<'t> {
    /// Flattens the gradient in the order of [`PinnModel::to_flat`].
    pub fn flatten(&self, g: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for v in self.fold.iter().chain(&self.tract) {
            out.extend(g.wrt(v).iter().copied());
        }
        out.push(g.wrt(&self.unknown)[[0, 0]]);
        out
    }

    /// Converts `t*`/`x*` slots of a raw output column into physical units.
    fn physical(&self, raw: &Jet2<Var<'t>>, col: usize, scale: f64, dx_star: f64) -> Jet2<Var<'t>> {
        let r = self.rate;
        Jet2 {
            v: raw.v.col(col) * scale,
            t: raw.t.map(|d| d.col(col) * scale * r),
            tt: raw.tt.map(|d| d.col(col) * scale * (r * r)),
            x: raw.x.map(|d| d.col(col) * (scale * dx_star)),
        }
    }

    /// Raw fold-network output jet in normalized time.
    pub fn fold_raw(&self, model: &PinnModel, ts: &[f64], order: TimeOrder) -> Jet2<Var<'t>> {
        let [v, d1, d2] = feature_matrices(ts, model.harmonics, order);
        let c = |a: Option<Array2<f64>>| a.map(|a| self.tape.constant(a));
        let input = Jet2::new(c(v).unwrap(), c(d1), c(d2), None);
        model.fold.forward(&self.fold, &input)
    }

    /// Fold displacements `(x_1, x_2)` in metres with time derivatives in seconds.
    pub fn folds(
        &self,
        model: &PinnModel,
        ts: &[f64],
        order: TimeOrder,
    ) -> (Jet2<Var<'t>>, Jet2<Var<'t>>) {
        let raw = self.fold_raw(model, ts, order);
        let s = model.scales.x;
        (self.physical(&raw, 0, s, 0.0), self.physical(&raw, 1, s, 0.0))
    }

    /// Network pressure and velocity `(p̃, ũ)` at normalized points.
    pub fn tract(
        &self,
        model: &PinnModel,
        xs: &[f64],
        ts: &[f64],
        order: TimeOrder,
        space: bool,
    ) -> (Jet2<Var<'t>>, Jet2<Var<'t>>) {
        assert_eq!(xs.len(), ts.len());
        let n = ts.len();
        let m = model.harmonics;
        let [v, d1, _] = feature_matrices(ts, m, order.min(TimeOrder::First));
        let xcol = Array2::from_shape_vec((n, 1), xs.to_vec()).unwrap();
        let v = concatenate![Axis(1), xcol, v.unwrap()];
        let d1 = d1.map(|d| concatenate![Axis(1), Array2::zeros((n, 1)), d]);
        let dx = space.then(|| {
            let mut e = Array2::zeros((n, 2 * m + 1));
            e.column_mut(0).fill(1.0);
            e
        });
        let c = |a: Option<Array2<f64>>| a.map(|a| self.tape.constant(a));
        let input = Jet2::new(self.tape.constant(v), c(d1), None, c(dx));
        let raw = model.tract.forward(&self.tract, &input);
        let dx_star = 2.0 / model.length;
        (
            self.physical(&raw, 0, model.scales.p, dx_star),
            self.physical(&raw, 1, model.scales.u, dx_star),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PinnModel {
        let cfg = RunConfig {
            fourier_features: 3,
            fold_width: 4,
            fold_blocks: 1,
            tract_width: 4,
            tract_blocks: 2,
            ..RunConfig::default()
        };
        PinnModel::new(&cfg, SmoothingCoefficients::default(), 0.16, Unknown::Period, 6e-3, 785.0)
            .unwrap()
    }

    #[test]
    fn flat_round_trip() {
        let mut m = tiny();
        let flat = m.to_flat();
        assert_eq!(flat.len(), m.parameter_count());
        assert!((flat[flat.len() - 1] - 6.0).abs() < 1e-12);
        let mut other = flat.clone();
        other[0] += 1.0;
        *other.last_mut().unwrap() = 5.0;
        m.set_flat(&other);
        assert_eq!(m.to_flat(), other);
        assert!((m.period - 5e-3).abs() < 1e-18);
    }

    #[test]
    fn rejects_bad_scalars() {
        let cfg = RunConfig::default();
        let sc = SmoothingCoefficients::default();
        assert!(PinnModel::new(&cfg, sc, 0.16, Unknown::Period, 0.0, 785.0).is_err());
        assert!(PinnModel::new(&cfg, sc, 0.16, Unknown::Pressure, 5e-3, -1.0).is_err());
    }

    #[test]
    fn time_slots_scale_with_period() {
        let m = tiny();
        let tape = Tape::new();
        let b = m.bind(&tape, false);
        let (x1, _) = b.folds(&m, &[0.3], TimeOrder::Second);
        let raw = b.fold_raw(&m, &[0.3], TimeOrder::Second);
        let r = 2.0 / m.period;
        let xs = m.scales.x;
        assert!((x1.t.unwrap().scalar() - raw.t.unwrap().col(0).scalar() * xs * r).abs() < 1e-15);
        let want = raw.tt.unwrap().col(0).scalar() * xs * r * r;
        assert!((x1.tt.unwrap().scalar() - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn space_slot_matches_difference() {
        let m = tiny();
        let tape = Tape::new();
        let b = m.bind(&tape, false);
        let h = 1e-6;
        let (p, _) = b.tract(&m, &[0.2], &[0.1], TimeOrder::First, true);
        let (pp, _) = b.tract(&m, &[0.2 + h], &[0.1], TimeOrder::Value, false);
        let (pm, _) = b.tract(&m, &[0.2 - h], &[0.1], TimeOrder::Value, false);
        // dx* = 2/l dx
        let fd = (pp.v.scalar() - pm.v.scalar()) / (2.0 * h) * 2.0 / m.length;
        let an = p.x.unwrap().scalar();
        assert!((an - fd).abs() < 1e-6 * an.abs().max(1.0), "{an} {fd}");
    }
}
