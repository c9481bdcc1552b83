//! One-dimensional vocal-tract acoustics.
//!
//! Residual operators take the field values and their partial derivatives
//! from the caller, so the same definitions serve the finite-difference
//! solver (derivatives by differencing) and the network trainer
//! (derivatives by forward-mode jets).

use std::f64::consts::PI;

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::params::PhysicalParams;

/// Field values and partials at one point of the tract.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticPoint<T = f64> {
    pub x: T,
    pub t: T,
    pub p: T,
    pub u: T,
    pub dp_dx: T,
    pub dp_dt: T,
    pub du_dx: T,
    pub du_dt: T,
}

/// Per-unit-length wall losses: viscous `r` (series) and thermal `g` (shunt).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallLoss<T = f64> {
    pub r: T,
    pub g: T,
}

/// Wall-loss coefficients for a section of area `a` and circumference `s`.
pub fn wall_loss(a: f64, s: f64, pp: &PhysicalParams) -> Result<WallLoss> {
    if !(a > 0.0) {
        return Err(Error::invalid("A", format!("area must be > 0, got {a}")));
    }
    if !(s > 0.0) {
        return Err(Error::invalid("S", format!("circumference must be > 0, got {s}")));
    }
    let r = pp.alpha_r * (s / (a * a)) * (pp.omega_c * pp.rho * pp.mu / 2.0).sqrt();
    let g = pp.alpha_g
        * s
        * ((pp.eta_air - 1.0) / (pp.rho * pp.c_air * pp.c_air))
        * (pp.lambda_air * pp.omega_c / (2.0 * pp.c_p * pp.rho)).sqrt();
    Ok(WallLoss { r, g })
}

/// Residuals of the two lossy telegrapher equations at one point:
/// `du/dx + G p + (A/K) dp/dt` and `dp/dx + R u + (rho/A) du/dt`.
pub fn telegrapher_residuals<T: Real>(
    pt: &AcousticPoint<T>,
    area: &T,
    wl: &WallLoss<T>,
    pp: &PhysicalParams,
) -> (T, T) {
    let r1 = pt.du_dx.clone()
        + wl.g.clone() * pt.p.clone()
        + area.clone() / pp.bulk_modulus * pt.dp_dt.clone();
    let r2 = pt.dp_dx.clone()
        + wl.r.clone() * pt.u.clone()
        + area.recip() * pp.rho * pt.du_dt.clone();
    (r1, r2)
}

/// Radiation load at the lips: resistance `R_r` and inertance `L_r`.
pub fn radiation_load(a_l: f64, pp: &PhysicalParams) -> (f64, f64) {
    let r_r = 128.0 * pp.rho * pp.c_air / (9.0 * PI * PI * a_l);
    let l_r = 8.0 * pp.rho / (3.0 * PI * (PI * a_l).sqrt());
    (r_r, l_r)
}

/// Residual of the open-end condition `L_r du/dt - p - (L_r/R_r) dp/dt`.
pub fn radiation_residual<T: Real>(
    p_l: &T,
    _u_l: &T,
    dp_dt: &T,
    du_dt: &T,
    a_l: f64,
    pp: &PhysicalParams,
) -> T {
    let (r_r, l_r) = radiation_load(a_l, pp);
    du_dt.clone() * l_r - p_l.clone() - dp_dt.clone() * (l_r / r_r)
}

/// Weight of the network pressure in [`blend_pressure`]: `cos(pi x / 2l)`,
/// written as `sin(pi (l - x) / 2l)` so it is exactly 0 at the lips and
/// exactly 1 at the glottis.
pub fn pressure_weight<T: Real>(x: &T, l: f64) -> T {
    ((-x.clone() + l) * (PI / (2.0 * l))).sin()
}

/// Weight of the network velocity in [`blend_velocity`]: `sin(pi x / 2l)`,
/// exactly 0 at the glottis and exactly 1 at the lips.
pub fn velocity_weight<T: Real>(x: &T, l: f64) -> T {
    (x.clone() * (PI / (2.0 * l))).sin()
}

/// Pressure with the lip value pinned to `p_data`.
///
/// The position is generic so that a jet seeded in `x` carries the
/// spatial derivative of the weights.
pub fn blend_pressure<T: Real>(p_tilde: &T, p_data: &T, x: &T, l: f64) -> T {
    let w = pressure_weight(x, l);
    p_tilde.clone() * w.clone() + p_data.clone() * (-w + 1.0)
}

/// Volume velocity with the glottis value pinned to `u_g`.
pub fn blend_velocity<T: Real>(u_tilde: &T, u_g: &T, x: &T, l: f64) -> T {
    let w = velocity_weight(x, l);
    u_tilde.clone() * w.clone() + u_g.clone() * (-w + 1.0)
}
