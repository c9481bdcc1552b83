//! Minibatch training of the model and its unknown scalar.

use super::adam::Adam;
use super::collocation::CollocationSet;
use super::loss::{loss_and_gradient, LossBreakdown, Physics};
use super::model::{PinnModel, Unknown};
use super::signal::PeriodicSeries;
use crate::error::{Error, Result};
use crate::io::Table;
use crate::params::{PhysicalParams, RunConfig, SmoothingCoefficients};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's minibatches, taken before each update.
    pub loss: LossBreakdown,
    /// Period after the epoch, s.
    pub period: f64,
    /// Subglottal pressure after the epoch, Pa.
    pub p_s: f64,
    /// Learning rate of the epoch's first step.
    pub learning_rate: f64,
    /// Steps skipped because of a non-finite gradient.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn to_table(&self) -> Table {
        let col = |f: &dyn Fn(&EpochRecord) -> f64| self.epochs.iter().map(f).collect::<Vec<_>>();
        let mut t = Table::new();
        t.push("epoch", col(&|r| r.epoch as f64));
        t.push("loss_total", col(&|r| r.loss.total));
        t.push("loss_f1", col(&|r| r.loss.fold1));
        t.push("loss_f2", col(&|r| r.loss.fold2));
        t.push("loss_t1", col(&|r| r.loss.tract1));
        t.push("loss_t2", col(&|r| r.loss.tract2));
        t.push("loss_r", col(&|r| r.loss.radiation));
        t.push("loss_anchor", col(&|r| r.loss.anchor));
        t.push("period_s", col(&|r| r.period));
        t.push("p_s_pa", col(&|r| r.p_s));
        t.push("learning_rate", col(&|r| r.learning_rate));
        t.push("skipped_steps", col(&|r| r.skipped as f64));
        t
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

#[derive(Debug, Clone)]
pub struct Training {
    pub model: PinnModel,
    pub history: History,
    /// Epoch at which the divergence check stopped training.
    pub diverged: Option<usize>,
    pub skipped_steps: usize,
}

/// Initial model for `unknown` with the configured offset applied.
///
/// Forward: `T = reference_period * (1 + init_offset)`, or `t_init` when no
/// reference is given. Inverse: `T` from `p_data`, `p_s = pp.p_s * (1 + init_offset)`.
pub fn initial_model(
    cfg: &RunConfig,
    pp: &PhysicalParams,
    sc: SmoothingCoefficients,
    unknown: Unknown,
    reference_period: Option<f64>,
    p_data: Option<&PeriodicSeries>,
) -> Result<PinnModel> {
    let (period, p_s) = match unknown {
        Unknown::Period => (
            reference_period.map_or(cfg.t_init, |t| t * (1.0 + cfg.init_offset)),
            pp.p_s,
        ),
        Unknown::Pressure => {
            let s = p_data.ok_or_else(|| {
                Error::invalid("p_data", "inverse analysis needs a lip-pressure waveform")
            })?;
            (s.period, pp.p_s * (1.0 + cfg.init_offset))
        }
    };
    PinnModel::new(cfg, sc, pp.l, unknown, period, p_s)
}

/// Runs `cfg.epochs` epochs of `cfg.minibatches` Adam steps each.
///
/// `progress` is called after every epoch. Training stops early, with
/// `diverged` set, when the epoch loss grows by `divergence_factor` over
/// `divergence_window` epochs.
pub fn train(
    cfg: &RunConfig,
    physics: &Physics<'_>,
    model: PinnModel,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<Training> {
    let colloc = CollocationSet::sample(cfg.n_f, cfg.n_t, cfg.n_r, cfg.minibatches, cfg.seed);
    let mut model = model;
    let mut flat = model.to_flat();
    let mut adam = Adam::new(flat.len(), cfg.lr_init, cfg.lr_decay);
    let mut history = History::default();
    let mut skipped_steps = 0;
    let mut diverged = None;
    for epoch in 0..cfg.epochs {
        let lr = adam.learning_rate(adam.step);
        let mut losses = Vec::with_capacity(cfg.minibatches);
        let mut skipped = 0;
        for (k, batch) in colloc.batches(cfg.seed, epoch).iter().enumerate() {
            let eval = loss_and_gradient(&model, physics, batch, cfg.chunk_size, k)?;
            losses.push(eval.loss);
            let applied = match &eval.gradient {
                Some(g) => adam.update(&mut flat, g),
                None => false,
            };
            if applied {
                model.set_flat(&flat);
            } else {
                skipped += 1;
            }
        }
        skipped_steps += skipped;
        let rec = EpochRecord {
            epoch,
            loss: LossBreakdown::mean_of(&losses),
            period: model.period,
            p_s: model.p_s,
            learning_rate: lr,
            skipped,
        };
        progress(&rec);
        history.epochs.push(rec);
        let w = cfg.divergence_window;
        if w > 0 && epoch >= w {
            let now = history.epochs[epoch].loss.total;
            let then = history.epochs[epoch - w].loss.total;
            if now > cfg.divergence_factor * then {
                diverged = Some(epoch);
                break;
            }
        }
    }
    Ok(Training {
        model,
        history,
        diverged,
        skipped_steps,
    })
}
