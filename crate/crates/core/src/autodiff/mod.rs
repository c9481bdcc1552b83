//! Differentiation engine used by the network trainer.
//!
//! Two layers cooperate:
//!
//! * [`Jet2`] carries forward-mode derivatives with respect to the network
//!   inputs (first and second derivative in time, first derivative in
//!   space) through any [`Real`] computation.
//! * [`Tape`] records batched tensor operations and returns exact
//!   reverse-mode gradients of a scalar loss with respect to its leaves.
//!
//! Because `Jet2<Var>` is itself built from tape operations, gradients of
//! the loss flow through the derivative slots as well, which is what a
//! residual containing `d²x/dt²` needs.

mod check;
mod jet;
mod tape;

pub use check::{finite_difference_check, FdReport};
pub use jet::Jet2;
pub use tape::{Gradients, Tape, Var};

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar-like numbers the physics can be written against.
///
/// Implemented for `f64`, for tape variables (elementwise over a batch)
/// and for [`Jet2`] over either.
pub trait Real:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn recip(&self) -> Self;
    /// `ln(1 + e^x)`, evaluated without overflow.
    fn softplus(&self) -> Self;
    /// `1 / (1 + e^-x)`.
    fn sigmoid(&self) -> Self;

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }

    fn cube(&self) -> Self {
        self.square() * self.clone()
    }
}

/// Stable scalar softplus.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Stable scalar logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Real for f64 {
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn recip(&self) -> Self {
        f64::recip(*self)
    }
    fn softplus(&self) -> Self {
        softplus(*self)
    }
    fn sigmoid(&self) -> Self {
        sigmoid(*self)
    }
}
