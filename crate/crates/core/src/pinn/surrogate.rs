//! Least-squares fit of the networks to a reference cycle.
//!
//! A fitted model satisfies the governing equations about as well as the
//! reference solution does, which gives a yardstick for the residual losses.

use ndarray::Array2;

use super::adam::Adam;
use super::model::{PinnModel, TimeOrder, Unknown};
use crate::autodiff::{Real, Tape};
use crate::error::{Error, Result};
use crate::reference::CycleRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub steps: usize,
    pub learning_rate: f64,
    /// Upper bound on tract data points drawn from the cycle grid.
    pub max_field_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            steps: 3000,
            learning_rate: 2e-3,
            max_field_points: 2000,
        }
    }
}

/// Fits the fold network to `x_1, x_2` and the tract network to the
/// pressure and velocity grid of `cycle`; the model period is set to the
/// cycle period. Returns the final normalized mean-squared misfit.
pub fn fit_to_cycle(model: &mut PinnModel, cycle: &CycleRecord, opts: &FitOptions) -> Result<f64> {
    if cycle.p_grid.is_empty() {
        return Err(Error::invalid("cycle", "reference cycle has no field grid"));
    }
    model.period = cycle.period;
    let n = cycle.time.len() - 1;
    let ts: Vec<f64> = cycle.time[..n]
        .iter()
        .map(|t| 2.0 * t / cycle.period - 1.0)
        .collect();
    let sx = model.scales.x;
    let x_target = Array2::from_shape_fn((n, 2), |(i, c)| {
        if c == 0 {
            cycle.x1[i] / sx
        } else {
            cycle.x2[i] / sx
        }
    });

    let nx = cycle.grid_x.len();
    let total = n * nx;
    let stride = total.div_ceil(opts.max_field_points.max(1)).max(1);
    let (mut fx, mut ft, mut fp, mut fu) = (vec![], vec![], vec![], vec![]);
    let l = model.length;
    for k in (0..total).step_by(stride) {
        let (i, j) = (k / nx, k % nx);
        fx.push(2.0 * cycle.grid_x[j] / l - 1.0);
        ft.push(ts[i]);
        fp.push(cycle.p_grid[[i, j]] / model.scales.p);
        fu.push(cycle.u_grid[[i, j]] / model.scales.u);
    }

    let mut flat = model.to_flat();
    let unknown_index = flat.len() - 1;
    let mut adam = Adam::new(flat.len(), opts.learning_rate, 0.0);
    let mut misfit = f64::INFINITY;
    for _ in 0..opts.steps {
        let tape = Tape::new();
        let b = model.bind(&tape, true);
        let xo = b.fold_raw(model, &ts, TimeOrder::Value).v;
        let (p, u) = b.tract(model, &fx, &ft, TimeOrder::Value, false);
        let e1 = (xo - tape.constant(x_target.clone())).square().mean();
        let ep = (p.v * (1.0 / model.scales.p) - tape.column(&fp)).square().mean();
        let eu = (u.v * (1.0 / model.scales.u) - tape.column(&fu)).square().mean();
        let loss = e1 + ep + eu;
        misfit = loss.scalar();
        let mut g = b.flatten(&tape.gradients(loss)?);
        g[unknown_index] = 0.0;
        adam.update(&mut flat, &g);
        model.set_flat(&flat);
    }
    if model.unknown == Unknown::Period {
        model.period = cycle.period;
    }
    Ok(misfit)
}
