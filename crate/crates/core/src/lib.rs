//! Physics-informed neural network for a coupled vocal-fold and vocal-tract model.

pub mod analysis;
pub mod autodiff;
pub mod error;
pub mod geometry;
pub mod glottis;
pub mod io;
pub mod params;
pub mod pinn;
pub mod reference;
pub mod tract;

pub use error::{Error, Result};
