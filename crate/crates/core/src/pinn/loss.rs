//! Residual losses of the coupled fold-tract system.

use rayon::prelude::*;

use super::collocation::Batch;
use super::model::{Bound, PinnModel, TimeOrder, Unknown};
use super::signal::PeriodicSeries;
use crate::autodiff::{Jet2, Real, Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::AreaFunction;
use crate::glottis::{fold_residual, smooth, GlottalState};
use crate::params::{PhysicalParams, RunConfig};
use crate::tract::{
    blend_pressure, blend_velocity, radiation_residual, telegrapher_residuals, wall_loss,
    AcousticPoint, WallLoss,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub fold: f64,
    pub tract1: f64,
    pub tract2: f64,
    pub radiation: f64,
    /// Weight of the phase-anchoring term; 0 disables it.
    pub anchor: f64,
}

impl LossWeights {
    /// Weights from the run configuration; the radiation weight is
    /// multiplied by `inverse_lambda_r_factor` when pressure is the unknown.
    pub fn from_config(cfg: &RunConfig, unknown: Unknown) -> Self {
        let factor = match unknown {
            Unknown::Period => 1.0,
            Unknown::Pressure => cfg.inverse_lambda_r_factor,
        };
        Self {
            fold: cfg.lambda_f,
            tract1: cfg.lambda_t1,
            tract2: cfg.lambda_t2,
            radiation: cfg.lambda_r * factor,
            anchor: cfg.phase_anchor,
        }
    }
}

/// Mean-squared residuals and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub fold1: f64,
    pub fold2: f64,
    pub tract1: f64,
    pub tract2: f64,
    pub radiation: f64,
    pub anchor: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn accumulate(&mut self, o: &LossBreakdown) {
        self.fold1 += o.fold1;
        self.fold2 += o.fold2;
        self.tract1 += o.tract1;
        self.tract2 += o.tract2;
        self.radiation += o.radiation;
        self.anchor += o.anchor;
        self.total += o.total;
    }

    fn scaled(mut self, s: f64) -> Self {
        self.fold1 *= s;
        self.fold2 *= s;
        self.tract1 *= s;
        self.tract2 *= s;
        self.radiation *= s;
        self.anchor *= s;
        self.total *= s;
        self
    }

    pub(crate) fn mean_of(items: &[LossBreakdown]) -> Self {
        let mut out = Self::default();
        for i in items {
            out.accumulate(i);
        }
        out.scaled(1.0 / items.len().max(1) as f64)
    }

    pub fn is_finite(&self) -> bool {
        [
            self.fold1,
            self.fold2,
            self.tract1,
            self.tract2,
            self.radiation,
            self.anchor,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Everything except the model that the residuals depend on.
#[derive(Debug, Clone, Copy)]
pub struct Physics<'a> {
    pub pp: &'a PhysicalParams,
    pub area: &'a AreaFunction,
    /// Lip pressure over one period; required when pressure is the unknown.
    pub p_data: Option<&'a PeriodicSeries>,
    pub weights: LossWeights,
}

/// Loss and flattened gradient of one minibatch.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: LossBreakdown,
    /// `None` when the reverse sweep produced a non-finite adjoint.
    pub gradient: Option<Vec<f64>>,
}

struct BatchSizes {
    fold: usize,
    tract: usize,
    radiation: usize,
}

fn sum_sq<'t>(r: Var<'t>) -> Var<'t> {
    r.square().sum()
}

fn lip_pressure_jet<'t>(tape: &'t Tape, series: &PeriodicSeries, ts: &[f64], order: TimeOrder) -> Jet2<Var<'t>> {
    let vals: Vec<[f64; 3]> = ts.iter().map(|&t| series.eval_normalized(t)).collect();
    let col = |k: usize| tape.column(&vals.iter().map(|v| v[k]).collect::<Vec<_>>());
    Jet2::new(
        col(0),
        (order >= TimeOrder::First).then(|| col(1)),
        (order >= TimeOrder::Second).then(|| col(2)),
        None,
    )
}

fn position_jet<'t>(tape: &'t Tape, xs: &[f64], space: bool) -> Jet2<Var<'t>> {
    Jet2::new(
        tape.column(xs),
        None,
        None,
        space.then(|| tape.column(&vec![1.0; xs.len()])),
    )
}

fn p_data_of<'p>(physics: &Physics<'p>, model: &PinnModel) -> Result<Option<&'p PeriodicSeries>> {
    match (model.unknown, physics.p_data) {
        (Unknown::Pressure, None) => Err(Error::invalid(
            "p_data",
            "inverse analysis needs a lip-pressure waveform",
        )),
        (Unknown::Pressure, Some(s)) => Ok(Some(s)),
        (Unknown::Period, _) => Ok(None),
    }
}

/// Pressure just above the glottis: network pressure blended at `x = 0`,
/// where the blend weight of the network is exactly one.
fn glottal_pressure<'t>(
    b: &Bound<'t>,
    model: &PinnModel,
    p_data: Option<&PeriodicSeries>,
    ts: &[f64],
    order: TimeOrder,
) -> Jet2<Var<'t>> {
    let (p, _) = b.tract(model, &vec![-1.0; ts.len()], ts, order, false);
    match p_data {
        Some(s) => {
            let pd = lip_pressure_jet(b.tape, s, ts, order);
            let x0 = Jet2::constant(b.tape.scalar(0.0));
            blend_pressure(&p, &pd, &x0, model.length)
        }
        None => p,
    }
}

/// Glottal state with time slots at normalized times `ts`.
pub(crate) fn glottal_jet<'t>(
    b: &Bound<'t>,
    model: &PinnModel,
    physics: &Physics<'_>,
    p_data: Option<&PeriodicSeries>,
    ts: &[f64],
    order: TimeOrder,
) -> GlottalState<Jet2<Var<'t>>> {
    let (x1, x2) = b.folds(model, ts, order);
    let p0 = glottal_pressure(b, model, p_data, ts, order);
    let ps = Jet2::constant(b.p_s);
    smooth::flow(
        &x1,
        &x2,
        &p0,
        &ps,
        physics.pp,
        physics.area.entrance_area(),
        &model.smoothing,
    )
}

struct Sums<'t> {
    total: Var<'t>,
    parts: LossBreakdown,
}

/// Weighted loss of `chunk`, with each mean taken over the enclosing batch sizes.
fn chunk_objective<'t>(
    b: &Bound<'t>,
    model: &PinnModel,
    physics: &Physics<'_>,
    chunk: &Batch,
    sizes: &BatchSizes,
    with_anchor: bool,
) -> Result<Sums<'t>> {
    let tape = b.tape;
    let pp = physics.pp;
    let sc = &model.smoothing;
    let w = physics.weights;
    let p_data = p_data_of(physics, model)?;
    let mut total = tape.scalar(0.0);
    let mut parts = LossBreakdown::default();

    if !chunk.fold.is_empty() {
        let ts = &chunk.fold;
        let (x1, x2) = b.folds(model, ts, TimeOrder::Second);
        let p0 = glottal_pressure(b, model, p_data, ts, TimeOrder::Value).v;
        let gs = smooth::flow(&x1.v, &x2.v, &p0, &b.p_s, pp, physics.area.entrance_area(), sc);
        let (f1, f2) = smooth::forces(&x1.v, &x2.v, &gs, &b.p_s, pp, sc);
        let s1 = smooth::spring(1, &x1.v, pp, sc);
        let s2 = smooth::spring(2, &x2.v, pp, sc);
        let (v1, a1) = (x1.t.unwrap(), x1.tt.unwrap());
        let (v2, a2) = (x2.t.unwrap(), x2.tt.unwrap());
        let r1 = fold_residual(1, &x1.v, &x2.v, &v1, &a1, &s1, &f1, pp);
        let r2 = fold_residual(2, &x2.v, &x1.v, &v2, &a2, &s2, &f2, pp);
        let n = sizes.fold as f64;
        let (q1, q2) = (sum_sq(r1) * (1.0 / n), sum_sq(r2) * (1.0 / n));
        parts.fold1 = q1.scalar();
        parts.fold2 = q2.scalar();
        total = total + (q1 + q2) * w.fold;
    }

    if !chunk.tract.is_empty() {
        let xs_star: Vec<f64> = chunk.tract.iter().map(|p| p.0).collect();
        let ts: Vec<f64> = chunk.tract.iter().map(|p| p.1).collect();
        let l = model.length;
        let xs: Vec<f64> = xs_star.iter().map(|x| ((x + 1.0) * 0.5 * l).clamp(0.0, l)).collect();
        let gs = glottal_jet(b, model, physics, p_data, &ts, TimeOrder::First);
        let (pt, ut) = b.tract(model, &xs_star, &ts, TimeOrder::First, true);
        let xj = position_jet(tape, &xs, true);
        let u = blend_velocity(&ut, &gs.u_g, &xj, l);
        let p = match p_data {
            Some(s) => blend_pressure(&pt, &lip_pressure_jet(tape, s, &ts, TimeOrder::First), &xj, l),
            None => pt,
        };
        let mut areas = Vec::with_capacity(xs.len());
        let mut r = Vec::with_capacity(xs.len());
        let mut g = Vec::with_capacity(xs.len());
        for &x in &xs {
            let (a, s) = physics.area.eval(x)?;
            let wl = wall_loss(a, s, pp)?;
            areas.push(a);
            r.push(wl.r);
            g.push(wl.g);
        }
        let point = AcousticPoint {
            x: xj.v,
            t: tape.column(&ts),
            p: p.v,
            u: u.v,
            dp_dx: p.x.unwrap(),
            dp_dt: p.t.unwrap(),
            du_dx: u.x.unwrap(),
            du_dt: u.t.unwrap(),
        };
        let wl = WallLoss {
            r: tape.column(&r),
            g: tape.column(&g),
        };
        let (e1, e2) = telegrapher_residuals(&point, &tape.column(&areas), &wl, pp);
        let n = sizes.tract as f64;
        let (q1, q2) = (sum_sq(e1) * (1.0 / n), sum_sq(e2) * (1.0 / n));
        parts.tract1 = q1.scalar();
        parts.tract2 = q2.scalar();
        total = total + q1 * w.tract1 + q2 * w.tract2;
    }

    if !chunk.radiation.is_empty() {
        let ts = &chunk.radiation;
        let (pt, ut) = b.tract(model, &vec![1.0; ts.len()], ts, TimeOrder::First, false);
        // the velocity blend weight is exactly one at the lips
        let p = match p_data {
            Some(s) => {
                let xl = Jet2::constant(tape.scalar(model.length));
                blend_pressure(&pt, &lip_pressure_jet(tape, s, ts, TimeOrder::First), &xl, model.length)
            }
            None => pt,
        };
        let res = radiation_residual(
            &p.v,
            &ut.v,
            &p.t.unwrap(),
            &ut.t.unwrap(),
            physics.area.lip_area(),
            pp,
        );
        let q = sum_sq(res) * (1.0 / sizes.radiation as f64);
        parts.radiation = q.scalar();
        total = total + q * w.radiation;
    }

    if with_anchor && w.anchor > 0.0 {
        // x_1 maximum pinned to mid-period: zero slope at t* = 0
        let raw = b.fold_raw(model, &[0.0], TimeOrder::First);
        let q = raw.t.unwrap().col(0).square().sum();
        parts.anchor = q.scalar();
        total = total + q * w.anchor;
    }

    parts.total = total.scalar();
    Ok(Sums { total, parts })
}

fn sizes_of(batch: &Batch) -> BatchSizes {
    BatchSizes {
        fold: batch.fold.len(),
        tract: batch.tract.len(),
        radiation: batch.radiation.len(),
    }
}

/// Losses of one batch without gradients.
pub fn compute_losses(model: &PinnModel, physics: &Physics<'_>, batch: &Batch) -> Result<LossBreakdown> {
    let tape = Tape::new();
    let b = model.bind(&tape, false);
    let s = chunk_objective(&b, model, physics, batch, &sizes_of(batch), true)?;
    if !s.parts.is_finite() {
        return Err(Error::NanLoss { batch: 0 });
    }
    Ok(s.parts)
}

/// Loss and gradient of one batch.
///
/// The batch is split into chunks of at most `chunk_size` points per set
/// (0 keeps it whole); chunks are evaluated in parallel on separate tapes
/// and their gradients summed in chunk order, so the result does not depend
/// on the thread count.
pub fn loss_and_gradient(
    model: &PinnModel,
    physics: &Physics<'_>,
    batch: &Batch,
    chunk_size: usize,
    batch_id: usize,
) -> Result<Evaluation> {
    let sizes = sizes_of(batch);
    let chunks = batch.chunks(chunk_size);
    let results: Vec<Result<(LossBreakdown, Option<Vec<f64>>)>> = chunks
        .par_iter()
        .enumerate()
        .map(|(k, chunk)| {
            let tape = Tape::new();
            let b = model.bind(&tape, true);
            let s = chunk_objective(&b, model, physics, chunk, &sizes, k == 0)?;
            let grad = tape.gradients(s.total).ok().map(|g| b.flatten(&g));
            Ok((s.parts, grad))
        })
        .collect();
    let mut loss = LossBreakdown::default();
    let mut gradient: Option<Vec<f64>> = Some(vec![0.0; model.parameter_count()]);
    for r in results {
        let (parts, g) = r?;
        loss.accumulate(&parts);
        gradient = match (gradient, g) {
            (Some(mut acc), Some(g)) => {
                acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                Some(acc)
            }
            _ => None,
        };
    }
    if !loss.is_finite() {
        return Err(Error::NanLoss { batch: batch_id });
    }
    Ok(Evaluation { loss, gradient })
}

/// Total loss as a function of the flat parameter vector.
pub fn total_at(model: &PinnModel, physics: &Physics<'_>, batch: &Batch, flat: &[f64]) -> Result<f64> {
    let mut m = model.clone();
    m.set_flat(flat);
    Ok(compute_losses(&m, physics, batch)?.total)
}
