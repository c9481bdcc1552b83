//! End-to-end check of the loss gradient against central differences on a
//! tiny model, in both analysis modes.

use super::collocation::CollocationSet;
use super::loss::{loss_and_gradient, total_at, LossWeights, Physics};
use super::model::{PinnModel, Unknown};
use super::signal::PeriodicSeries;
use crate::autodiff::{finite_difference_check, FdReport};
use crate::error::{Error, Result};
use crate::geometry::AreaFunction;
use crate::params::{PhysicalParams, RunConfig, SmoothingCoefficients};

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub seed: u64,
    /// Central-difference step in the flat parameter coordinates.
    pub step: f64,
    /// Errors are relative to `max(|analytic|, |numeric|, floor * max|gradient|)`.
    pub floor: f64,
    pub period: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            step: 1e-6,
            floor: 1e-3,
            period: 6.0e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub forward: FdReport,
    pub inverse: FdReport,
    pub parameters: usize,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.forward.max_rel_error.max(self.inverse.max_rel_error)
    }

    pub fn report(&self) -> String {
        format!(
            "parameters={}\nforward: {}\ninverse: {}\nmax_rel_error={:.3e}\n",
            self.parameters,
            self.forward.summary(),
            self.inverse.summary(),
            self.max_rel_error()
        )
    }
}

/// Width 4, one fold block, two tract blocks, 16/8/8 collocation points.
pub fn tiny_config(seed: u64) -> RunConfig {
    RunConfig {
        fourier_features: 3,
        fold_width: 4,
        fold_blocks: 1,
        tract_width: 4,
        tract_blocks: 2,
        n_f: 16,
        n_t: 8,
        n_r: 8,
        minibatches: 1,
        seed,
        ..RunConfig::default()
    }
}

/// A smooth lip-pressure waveform for exercising the inverse path.
pub fn synthetic_lip_pressure(period: f64) -> PeriodicSeries {
    PeriodicSeries {
        period,
        mean: 2.0,
        cos: vec![40.0, -12.0, 3.0],
        sin: vec![25.0, 8.0, -1.5],
    }
}

fn check(
    cfg: &RunConfig,
    pp: &PhysicalParams,
    af: &AreaFunction,
    sc: SmoothingCoefficients,
    unknown: Unknown,
    p_data: Option<&PeriodicSeries>,
    opts: &GradcheckOptions,
) -> Result<FdReport> {
    let model = PinnModel::new(cfg, sc, pp.l, unknown, opts.period, pp.p_s)?;
    let physics = Physics {
        pp,
        area: af,
        p_data,
        weights: LossWeights::from_config(cfg, unknown),
    };
    let batch = CollocationSet::sample(cfg.n_f, cfg.n_t, cfg.n_r, 1, cfg.seed).full();
    let eval = loss_and_gradient(&model, &physics, &batch, 0, 0)?;
    let grad = eval
        .gradient
        .ok_or_else(|| Error::NonFinite { node: 0 })?;
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let point = model.to_flat();
    let f = |p: &[f64]| total_at(&model, &physics, &batch, p).unwrap_or(f64::NAN);
    Ok(finite_difference_check(f, &grad, &point, opts.step, opts.floor * scale))
}

pub fn run(
    pp: &PhysicalParams,
    af: &AreaFunction,
    sc: SmoothingCoefficients,
    opts: &GradcheckOptions,
) -> Result<GradcheckReport> {
    let cfg = tiny_config(opts.seed);
    let series = synthetic_lip_pressure(opts.period);
    let forward = check(&cfg, pp, af, sc, Unknown::Period, None, opts)?;
    let inverse = check(&cfg, pp, af, sc, Unknown::Pressure, Some(&series), opts)?;
    Ok(GradcheckReport {
        parameters: forward.analytic.len(),
        forward,
        inverse,
    })
}
