//! Evaluating a model: field values and one-cycle waveforms.

use super::loss::{glottal_jet, Physics};
use super::model::{PinnModel, TimeOrder, Unknown};
use crate::autodiff::{Jet2, Tape};
use crate::error::{Error, Result};
use crate::io::Table;
use crate::reference::{aligned_correlation, CycleRecord};
use crate::tract::{blend_pressure, blend_velocity};

fn p_data_for<'p>(model: &PinnModel, physics: &Physics<'p>) -> Result<Option<&'p super::PeriodicSeries>> {
    match model.unknown {
        Unknown::Period => Ok(None),
        Unknown::Pressure => physics
            .p_data
            .map(Some)
            .ok_or_else(|| Error::invalid("p_data", "inverse analysis needs a lip-pressure waveform")),
    }
}

/// Pressure and volume velocity at physical positions `xs` and normalized times `ts`,
/// with both hard constraints applied.
pub fn field(
    model: &PinnModel,
    physics: &Physics<'_>,
    xs: &[f64],
    ts: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = model.length;
    if let Some(&x) = xs.iter().find(|x| !(0.0..=l).contains(*x)) {
        return Err(Error::OutOfRange { x, l });
    }
    let p_data = p_data_for(model, physics)?;
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let xs_star: Vec<f64> = xs.iter().map(|x| 2.0 * x / l - 1.0).collect();
    let (pt, ut) = b.tract(model, &xs_star, ts, TimeOrder::Value, false);
    let gs = glottal_jet(&b, model, physics, p_data, ts, TimeOrder::Value);
    let xj = Jet2::constant(tape.column(xs));
    let u = blend_velocity(&ut, &gs.u_g, &xj, l);
    let p = match p_data {
        Some(s) => {
            let vals: Vec<f64> = ts.iter().map(|&t| s.eval_normalized(t)[0]).collect();
            blend_pressure(&pt, &Jet2::constant(tape.column(&vals)), &xj, l)
        }
        None => pt,
    };
    Ok((p.v.value().column(0).to_vec(), u.v.value().column(0).to_vec()))
}

/// Glottal flow at normalized times.
pub fn glottal_flow(model: &PinnModel, physics: &Physics<'_>, ts: &[f64]) -> Result<Vec<f64>> {
    let p_data = p_data_for(model, physics)?;
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let gs = glottal_jet(&b, model, physics, p_data, ts, TimeOrder::Value);
    Ok(gs.u_g.v.value().column(0).to_vec())
}

/// Raw network outputs with their normalized-time derivatives at `t*`,
/// `[x_1, x_2, p̃(x*), ũ(x*)] x [value, d/dt*, d²/dt*²]`.
pub fn raw_outputs(model: &PinnModel, x_star: f64, t_star: f64) -> [[f64; 3]; 4] {
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let f = b.fold_raw(model, &[t_star], TimeOrder::Second);
    let feats = super::features::fourier_features_with_derivatives(t_star, model.harmonics);
    let row = |head: f64, v: &[f64]| {
        let mut r = vec![head];
        r.extend_from_slice(v);
        tape.constant(ndarray::Array2::from_shape_vec((1, r.len()), r).unwrap())
    };
    let input = Jet2::new(
        row(x_star, &feats[0]),
        Some(row(0.0, &feats[1])),
        Some(row(0.0, &feats[2])),
        None,
    );
    let t = model.tract.forward(&b.tract, &input);
    let get = |j: &Jet2<crate::autodiff::Var<'_>>, c: usize| {
        [
            j.v.value()[[0, c]],
            j.t.unwrap().value()[[0, c]],
            j.tt.unwrap().value()[[0, c]],
        ]
    };
    [get(&f, 0), get(&f, 1), get(&t, 0), get(&t, 1)]
}

/// One cycle of model outputs on a uniform grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnCycle {
    pub period: f64,
    pub p_s: f64,
    pub time: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub u_g: Vec<f64>,
    pub p0: Vec<f64>,
    pub p_l: Vec<f64>,
    pub u_l: Vec<f64>,
}

impl PinnCycle {
    pub fn evaluate(model: &PinnModel, physics: &Physics<'_>, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::invalid("samples", "need at least 2"));
        }
        let ts: Vec<f64> = (0..samples)
            .map(|i| 2.0 * i as f64 / samples as f64 - 1.0)
            .collect();
        let tape = Tape::new();
        let b = model.bind(&tape, false);
        let (x1, x2) = b.folds(model, &ts, TimeOrder::Value);
        let u_g = glottal_flow(model, physics, &ts)?;
        let n = ts.len();
        let l = model.length;
        let (p0, _) = field(model, physics, &vec![0.0; n], &ts)?;
        let (p_l, u_l) = field(model, physics, &vec![l; n], &ts)?;
        let col = |v: crate::autodiff::Var<'_>| v.value().column(0).to_vec();
        Ok(Self {
            period: model.period,
            p_s: model.p_s,
            time: ts.iter().map(|t| (t + 1.0) * 0.5 * model.period).collect(),
            x1: col(x1.v),
            x2: col(x2.v),
            u_g,
            p0,
            p_l,
            u_l,
        })
    }

    pub fn rate(&self) -> f64 {
        self.time.len() as f64 / self.period
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        t.push("t_s", self.time.clone());
        t.push("x1_m", self.x1.clone());
        t.push("x2_m", self.x2.clone());
        t.push("u_g_m3s", self.u_g.clone());
        t.push("p0_pa", self.p0.clone());
        t.push("p_l_pa", self.p_l.clone());
        t.push("u_l_m3s", self.u_l.clone());
        t
    }

    /// Period error and phase-aligned correlations against a reference cycle.
    pub fn compare(&self, reference: &CycleRecord) -> Result<Comparison> {
        let n = self.time.len();
        let resample = |series: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let t = i as f64 / n as f64 * reference.period;
                    crate::reference::interp(&reference.time, series, t)
                })
                .collect()
        };
        let corr = |mine: &[f64], theirs: &[f64]| aligned_correlation(mine, &resample(theirs)).1;
        Ok(Comparison {
            period_error: (self.period - reference.period).abs() / reference.period,
            x1_correlation: corr(&self.x1, &reference.x1),
            x2_correlation: corr(&self.x2, &reference.x2),
            u_g_correlation: corr(&self.u_g, &reference.u_g),
            p_l_correlation: corr(&self.p_l, &reference.p_l),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub period_error: f64,
    pub x1_correlation: f64,
    pub x2_correlation: f64,
    pub u_g_correlation: f64,
    pub p_l_correlation: f64,
}

impl Comparison {
    pub fn report(&self) -> String {
        format!(
            "period_rel_error={:.6e}\nx1_correlation={:.6}\nx2_correlation={:.6}\nu_g_correlation={:.6}\np_l_correlation={:.6}\n",
            self.period_error,
            self.x1_correlation,
            self.x2_correlation,
            self.u_g_correlation,
            self.p_l_correlation
        )
    }
}
