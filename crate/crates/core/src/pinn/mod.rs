//! Physics-informed networks for one steady oscillation cycle.
//!
//! A fold network maps periodic time features to the two mass
//! displacements; a tract network maps position and the same features to
//! pressure and volume velocity. The glottal flow computed from the folds
//! is imposed on the tract velocity at the glottis by construction, and in
//! the inverse analysis a measured lip pressure is imposed at the lips the
//! same way. The period (forward) or the subglottal pressure (inverse) is
//! trained together with the network weights.

pub mod adam;
pub mod checkpoint;
pub mod collocation;
pub mod features;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod network;
pub mod predict;
pub mod signal;
pub mod surrogate;
pub mod train;

pub use adam::Adam;
pub use collocation::{Batch, CollocationSet, Sobol2};
pub use features::{fourier_features, scale_inputs, snake};
pub use loss::{compute_losses, loss_and_gradient, Evaluation, LossBreakdown, LossWeights, Physics};
pub use model::{OutputScales, PinnModel, Unknown};
pub use network::{Network, NetworkShape};
pub use predict::PinnCycle;
pub use signal::PeriodicSeries;
pub use train::{initial_model, train, EpochRecord, History, Training};
