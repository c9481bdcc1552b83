//! Two-mass vocal-fold physics.
//!
//! Every quantity exists in two flavours. [`Mode::Exact`] follows the
//! piecewise model: the glottal area is clipped at zero, the driving
//! forces switch between four open/closed tables and the collision spring
//! engages below the contact position. [`Mode::Smooth`] replaces each
//! switch by a differentiable stand-in (softplus areas, sigmoid gates,
//! softplus pressure drop) so the residuals can be trained by gradient
//! descent. The smooth forms live in [`smooth`] and are generic over
//! [`Real`], so the same code runs on `f64` and on tape variables.
//!
//! The collision spring uses the penetration depth `x_j - x_min,j`, which
//! vanishes at contact and keeps the elastic force continuous there. In
//! smooth mode its branch is gated with the same sigmoid as the forces.

use crate::autodiff::Real;
use crate::params::{PhysicalParams, SmoothingCoefficients};

/// Displacements (m) and velocities (m/s) of the two masses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FoldState {
    pub x1: f64,
    pub x2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl FoldState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    pub fn x(&self, j: usize) -> f64 {
        match j {
            1 => self.x1,
            2 => self.x2,
            _ => panic!("mass index must be 1 or 2"),
        }
    }

    /// Opening beyond the contact position, `x_j - x_min,j`.
    pub fn opening(&self, j: usize, pp: &PhysicalParams) -> f64 {
        self.x(j) - pp.x_min(j)
    }

    pub fn is_finite(&self) -> bool {
        [self.x1, self.x2, self.v1, self.v2].iter().all(|v| v.is_finite())
    }
}

/// Areas, resistance chain, flow and pressures along the glottis.
#[derive(Debug, Clone, PartialEq)]
pub struct GlottalState<T = f64> {
    pub ag1: T,
    pub ag2: T,
    /// Quadratic flow coefficient `R_c + R_12 + R_e`, Pa·s²/m⁶.
    pub r_alpha: T,
    /// Viscous coefficient `R_v1 + R_v2`, Pa·s/m³.
    pub r_beta: T,
    /// Pressure term (negative of the available drop), Pa.
    pub r_gamma: T,
    pub u_g: T,
    pub p11: T,
    pub p12: T,
    pub p21: T,
    pub p22: T,
    pub p1: T,
    pub p2: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Exact,
    Smooth(SmoothingCoefficients),
}

pub fn glottal_areas(fs: &FoldState, pp: &PhysicalParams, mode: Mode) -> (f64, f64) {
    match mode {
        Mode::Exact => (
            (2.0 * pp.l_g * fs.opening(1, pp)).max(0.0),
            (2.0 * pp.l_g * fs.opening(2, pp)).max(0.0),
        ),
        Mode::Smooth(sc) => (
            smooth::area(&fs.x1, 1, pp, &sc),
            smooth::area(&fs.x2, 2, pp, &sc),
        ),
    }
}

/// Quasi-steady glottal flow for tract entrance pressure `p0` and entrance area `a0`.
///
/// In exact mode a closed segment gives zero flow; `p1` is then `p_s` and
/// `p2` is `p_s` only when the lower mass is open and the upper one closed,
/// which reproduces the closed-state force table.
pub fn glottal_flow(
    fs: &FoldState,
    p0: f64,
    pp: &PhysicalParams,
    a0: f64,
    mode: Mode,
) -> GlottalState {
    match mode {
        Mode::Smooth(sc) => smooth::flow(&fs.x1, &fs.x2, &p0, &pp.p_s, pp, a0, &sc),
        Mode::Exact => {
            let (ag1, ag2) = glottal_areas(fs, pp, Mode::Exact);
            let r_gamma = p0 - pp.p_s;
            if ag1 <= 0.0 || ag2 <= 0.0 {
                let p1 = pp.p_s;
                let p2 = if ag1 > 0.0 { pp.p_s } else { 0.0 };
                return GlottalState {
                    ag1,
                    ag2,
                    r_alpha: f64::INFINITY,
                    r_beta: f64::INFINITY,
                    r_gamma,
                    u_g: 0.0,
                    p11: p1,
                    p12: p1,
                    p21: p2,
                    p22: p2,
                    p1,
                    p2,
                };
            }
            let chain = Resistances::new(&ag1, &ag2, pp, a0);
            // Exact mode admits p0 > p_s; no backflow is modeled, so the flow stops.
            let u_g = if r_gamma >= 0.0 {
                0.0
            } else {
                quadratic_root(&chain.r_alpha, &chain.r_beta, &r_gamma)
            };
            chain.into_state(ag1, ag2, r_gamma, u_g, &pp.p_s)
        }
    }
}

/// Elastic restoring force of mass `j` (N).
pub fn spring_force(j: usize, x: f64, pp: &PhysicalParams, mode: Mode) -> f64 {
    match mode {
        Mode::Smooth(sc) => smooth::spring(j, &x, pp, &sc),
        Mode::Exact => {
            let (k, eta_k, h, eta_h) = spring_constants(j, pp);
            let mut s = k * (x + eta_k * x * x * x);
            let pen = x - pp.x_min(j);
            if pen <= 0.0 {
                s += h * (pen + eta_h * pen * pen * pen);
            }
            s
        }
    }
}

/// Aerodynamic forces on the two masses (N).
pub fn driving_forces(
    fs: &FoldState,
    gs: &GlottalState,
    pp: &PhysicalParams,
    mode: Mode,
) -> (f64, f64) {
    match mode {
        Mode::Smooth(sc) => smooth::forces(&fs.x1, &fs.x2, gs, &pp.p_s, pp, &sc),
        Mode::Exact => {
            let open1 = fs.opening(1, pp) > 0.0;
            let open2 = fs.opening(2, pp) > 0.0;
            let (a1, a2) = (pp.l_g * pp.d_1, pp.l_g * pp.d_2);
            match (open1, open2) {
                (true, true) => (a1 * gs.p1, a2 * gs.p2),
                (false, _) => (a1 * pp.p_s, 0.0),
                (true, false) => (a1 * pp.p_s, a2 * pp.p_s),
            }
        }
    }
}

/// Accelerations solving the two equations of motion for given forces.
pub fn fold_acceleration(
    fs: &FoldState,
    f: (f64, f64),
    pp: &PhysicalParams,
    mode: Mode,
) -> (f64, f64) {
    let s1 = spring_force(1, fs.x1, pp, mode);
    let s2 = spring_force(2, fs.x2, pp, mode);
    (
        (f.0 - pp.c_1 * fs.v1 - s1 - pp.k_c * (fs.x1 - fs.x2)) / pp.m_1,
        (f.1 - pp.c_2 * fs.v2 - s2 - pp.k_c * (fs.x2 - fs.x1)) / pp.m_2,
    )
}

/// Equation-of-motion residuals `m a + c v + s + k_c (x_j - x_other) - f` (N).
pub fn fold_residuals(
    fs: &FoldState,
    a: (f64, f64),
    f: (f64, f64),
    pp: &PhysicalParams,
    mode: Mode,
) -> (f64, f64) {
    let s1 = spring_force(1, fs.x1, pp, mode);
    let s2 = spring_force(2, fs.x2, pp, mode);
    (
        fold_residual(1, &fs.x1, &fs.x2, &fs.v1, &a.0, &s1, &f.0, pp),
        fold_residual(2, &fs.x2, &fs.x1, &fs.v2, &a.1, &s2, &f.1, pp),
    )
}

/// Residual of the equation of motion of mass `j`, generic over the number type.
#[allow(clippy::too_many_arguments)]
pub fn fold_residual<T: Real>(
    j: usize,
    x: &T,
    x_other: &T,
    v: &T,
    a: &T,
    s: &T,
    f: &T,
    pp: &PhysicalParams,
) -> T {
    let (m, c) = match j {
        1 => (pp.m_1, pp.c_1),
        2 => (pp.m_2, pp.c_2),
        _ => panic!("mass index must be 1 or 2"),
    };
    a.clone() * m + v.clone() * c + s.clone() + (x.clone() - x_other.clone()) * pp.k_c
        - f.clone()
}

fn spring_constants(j: usize, pp: &PhysicalParams) -> (f64, f64, f64, f64) {
    match j {
        1 => (pp.k_1, pp.eta_k1, pp.h_1, pp.eta_h1),
        2 => (pp.k_2, pp.eta_k2, pp.h_2, pp.eta_h2),
        _ => panic!("mass index must be 1 or 2"),
    }
}

struct Resistances<T> {
    rc: T,
    rv1: T,
    r12: T,
    rv2: T,
    r_alpha: T,
    r_beta: T,
}

impl<T: Real> Resistances<T> {
    fn new(ag1: &T, ag2: &T, pp: &PhysicalParams, a0: f64) -> Self {
        let rho = pp.rho;
        let inv1 = ag1.recip();
        let inv2 = ag2.recip();
        let inv1_sq = inv1.square();
        let inv2_sq = inv2.square();
        let visc = 12.0 * pp.mu * pp.l_g * pp.l_g;
        let rc = inv1_sq.clone() * (1.37 * rho / 2.0);
        let rv1 = inv1_sq.clone() * inv1 * (visc * pp.d_1);
        let r12 = (inv2_sq.clone() - inv1_sq) * (rho / 2.0);
        let rv2 = inv2_sq * inv2.clone() * (visc * pp.d_2);
        // -rho / (A_g2 A_0) * (1 - A_g2 / A_0)
        let re = inv2 * (-rho / a0) + rho / (a0 * a0);
        let r_alpha = rc.clone() + r12.clone() + re;
        let r_beta = rv1.clone() + rv2.clone();
        Self {
            rc,
            rv1,
            r12,
            rv2,
            r_alpha,
            r_beta,
        }
    }

    fn into_state(self, ag1: T, ag2: T, r_gamma: T, u_g: T, p_s: &T) -> GlottalState<T> {
        let u2 = u_g.square();
        let p11 = p_s.clone() - self.rc * u2.clone();
        let p12 = p11.clone() - self.rv1 * u_g.clone();
        let p21 = p12.clone() - self.r12 * u2.clone();
        let p22 = p21.clone() - self.rv2 * u_g.clone();
        let p1 = (p11.clone() + p12.clone()) * 0.5;
        let p2 = (p21.clone() + p22.clone()) * 0.5;
        GlottalState {
            ag1,
            ag2,
            r_alpha: self.r_alpha,
            r_beta: self.r_beta,
            r_gamma,
            u_g,
            p11,
            p12,
            p21,
            p22,
            p1,
            p2,
        }
    }
}

/// Non-negative root of `a u² + b u + c = 0` for `a > 0`, `b > 0`, `c <= 0`.
///
/// Written as `2|c|/b / (1 + sqrt(1 - 4ac/b²))`, which equals the textbook
/// `(-b + sqrt(b² - 4ac)) / 2a` without its cancellation when `b` dominates
/// and without overflowing `b²` for a nearly closed glottis.
fn quadratic_root<T: Real>(a: &T, b: &T, c: &T) -> T {
    let inv_b = b.recip();
    let q = -c.clone() * inv_b.clone();
    let disc = a.clone() * q.clone() * inv_b * 4.0 + 1.0;
    q * 2.0 / (disc.sqrt() + 1.0)
}

/// Differentiable forms, generic over [`Real`].
pub mod smooth {
    use super::*;

    /// Softplus glottal area of mass `j` plus [`AREA_FLOOR`].
    pub fn area<T: Real>(x: &T, j: usize, pp: &PhysicalParams, sc: &SmoothingCoefficients) -> T {
        let opening = x.clone() - pp.x_min(j);
        (opening * sc.beta_ag).softplus() * (2.0 * pp.l_g / sc.beta_ag) + AREA_FLOOR
    }

    /// Area added to the softplus, m². Deep closure underflows the softplus
    /// and `1/A^3` in the resistance chain would overflow to inf - inf.
    pub const AREA_FLOOR: f64 = 1e-24;

    /// Sigmoid gate `1 / (1 + exp(-beta_f z))`.
    pub fn gate<T: Real>(z: &T, sc: &SmoothingCoefficients) -> T {
        (z.clone() * sc.beta_f).sigmoid()
    }

    /// Glottal flow with softplus areas and the no-backflow pressure term.
    #[allow(clippy::too_many_arguments)]
    pub fn flow<T: Real>(
        x1: &T,
        x2: &T,
        p0: &T,
        p_s: &T,
        pp: &PhysicalParams,
        a0: f64,
        sc: &SmoothingCoefficients,
    ) -> GlottalState<T> {
        let ag1 = area(x1, 1, pp, sc);
        let ag2 = area(x2, 2, pp, sc);
        let chain = Resistances::new(&ag1, &ag2, pp, a0);
        let r_gamma = -((p_s.clone() - p0.clone()) * sc.beta_p).softplus() / sc.beta_p;
        let u_g = quadratic_root(&chain.r_alpha, &chain.r_beta, &r_gamma);
        chain.into_state(ag1, ag2, r_gamma, u_g, p_s)
    }

    /// Spring force with the collision branch blended in by `gate(-opening)`.
    pub fn spring<T: Real>(j: usize, x: &T, pp: &PhysicalParams, sc: &SmoothingCoefficients) -> T {
        let (k, eta_k, h, eta_h) = spring_constants(j, pp);
        let linear = (x.clone() + x.cube() * eta_k) * k;
        let pen = x.clone() - pp.x_min(j);
        let collision = (pen.clone() + pen.cube() * eta_h) * h;
        linear + gate(&(-pen), sc) * collision
    }

    /// Driving forces with sigmoid-gated open/closed blending.
    pub fn forces<T: Real>(
        x1: &T,
        x2: &T,
        gs: &GlottalState<T>,
        p_s: &T,
        pp: &PhysicalParams,
        sc: &SmoothingCoefficients,
    ) -> (T, T) {
        let g1 = gate(&(x1.clone() - pp.x_min1), sc);
        let g2 = gate(&(x2.clone() - pp.x_min2), sc);
        let both = g1.clone() * g2.clone();
        let (a1, a2) = (pp.l_g * pp.d_1, pp.l_g * pp.d_2);
        let f1 = (both.clone() * gs.p1.clone() + (-both.clone() + 1.0) * p_s.clone()) * a1;
        let f2 = (both * gs.p2.clone() + g1 * (-g2 + 1.0) * p_s.clone()) * a2;
        (f1, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Jet2;

    const A0: f64 = 3.0e-4;

    fn pp() -> PhysicalParams {
        PhysicalParams::default()
    }

    fn smooth_mode() -> Mode {
        Mode::Smooth(SmoothingCoefficients::default())
    }

    fn open_state(x1: f64, x2: f64) -> FoldState {
        FoldState {
            x1,
            x2,
            ..Default::default()
        }
    }

    fn bisect(a: f64, b: f64, c: f64) -> f64 {
        let f = |u: f64| a * u * u + b * u + c;
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn exact_area_closes_at_contact() {
        let p = pp();
        let fs = open_state(p.x_min1, 0.0);
        assert_eq!(glottal_areas(&fs, &p, Mode::Exact).0, 0.0);
    }

    #[test]
    fn smooth_area_follows_asymptote_and_ln2() {
        let p = pp();
        let sc = SmoothingCoefficients::default();
        let xh = 30.0 / sc.beta_ag;
        let a = smooth::area(&(p.x_min1 + xh), 1, &p, &sc);
        let direct = 2.0 * p.l_g * xh;
        assert!((a - direct).abs() / direct < 1e-10);
        let at_contact = smooth::area(&p.x_min1, 1, &p, &sc);
        let expected = 2.0 * p.l_g * std::f64::consts::LN_2 / sc.beta_ag;
        assert!((at_contact - expected).abs() < 1e-18);
        assert!(at_contact > 0.0);
    }

    #[test]
    fn deep_closure_stays_finite() {
        let p = pp();
        let sc = SmoothingCoefficients::default();
        let st = smooth::flow(&-0.02, &-0.02, &0.0, &p.p_s, &p, 1e-4, &sc);
        assert!(st.u_g.is_finite() && st.u_g >= 0.0 && st.u_g < 1e-30);
        assert!(st.p1.is_finite() && st.p2.is_finite() && st.p21.is_finite());
    }

    #[test]
    fn equal_pressures_give_zero_flow() {
        let p = pp();
        let gs = glottal_flow(&open_state(1e-4, 1e-4), p.p_s, &p, A0, Mode::Exact);
        assert_eq!(gs.u_g, 0.0);
    }

    #[test]
    fn flow_matches_bisection_and_back_substitution() {
        let p = pp();
        let gs = glottal_flow(&open_state(2e-4, 2e-4), 0.0, &p, A0, Mode::Exact);
        let root = bisect(gs.r_alpha, gs.r_beta, gs.r_gamma);
        assert!((gs.u_g - root).abs() / root < 1e-9);
        let back = -(gs.r_alpha * gs.u_g * gs.u_g + gs.r_beta * gs.u_g);
        assert!((back - (0.0 - p.p_s)).abs() / p.p_s < 1e-10);
        // the pressure chain lands on p0
        let p0 = gs.p22
            - (-p.rho / (gs.ag2 * A0) * (1.0 - gs.ag2 / A0)) * gs.u_g * gs.u_g;
        assert!(p0.abs() < 1e-9 * p.p_s);
        assert!(gs.u_g > 1e-4 && gs.u_g < 1e-3, "u_g = {}", gs.u_g);
    }

    #[test]
    fn smooth_flow_is_never_negative() {
        let p = pp();
        for &p0 in &[-2000.0, 0.0, 700.0, 785.0, 900.0, 5000.0] {
            for &x in &[-5e-4, -1.79e-4, 0.0, 3e-4] {
                let gs = glottal_flow(&open_state(x, x * 0.5), p0, &p, A0, smooth_mode());
                assert!(gs.u_g >= 0.0 && gs.u_g.is_finite(), "p0={p0} x={x}");
            }
        }
    }

    #[test]
    fn closed_glottis_convention() {
        let p = pp();
        let gs = glottal_flow(&open_state(-3e-4, 1e-4), 0.0, &p, A0, Mode::Exact);
        assert_eq!(gs.u_g, 0.0);
        assert_eq!((gs.p1, gs.p2), (p.p_s, 0.0));
        let gs = glottal_flow(&open_state(1e-4, -3e-4), 0.0, &p, A0, Mode::Exact);
        assert_eq!((gs.p1, gs.p2), (p.p_s, p.p_s));
    }

    #[test]
    fn spring_force_values() {
        let p = pp();
        assert_eq!(spring_force(1, 0.0, &p, Mode::Exact), 0.0);
        let s = spring_force(1, 1e-3, &p, Mode::Exact);
        assert!((s - 0.16).abs() < 1e-15, "{s}");
        // continuity at contact
        let eps = 1e-12;
        let left = spring_force(2, p.x_min2 - eps, &p, Mode::Exact);
        let right = spring_force(2, p.x_min2 + eps, &p, Mode::Exact);
        assert!((left - right).abs() < 1e-9);
    }

    #[test]
    fn driving_force_tables() {
        let p = pp();
        let (a1, a2) = (p.l_g * p.d_1, p.l_g * p.d_2);
        let fs = open_state(1e-4, 1e-4);
        let gs = glottal_flow(&fs, 0.0, &p, A0, Mode::Exact);
        let (f1, f2) = driving_forces(&fs, &gs, &p, Mode::Exact);
        assert_eq!((f1, f2), (a1 * gs.p1, a2 * gs.p2));
        let fs = open_state(-3e-4, 1e-4);
        let gs = glottal_flow(&fs, 0.0, &p, A0, Mode::Exact);
        assert_eq!(driving_forces(&fs, &gs, &p, Mode::Exact), (a1 * p.p_s, 0.0));
        let fs = open_state(1e-4, -3e-4);
        let gs = glottal_flow(&fs, 0.0, &p, A0, Mode::Exact);
        assert_eq!(driving_forces(&fs, &gs, &p, Mode::Exact), (a1 * p.p_s, a2 * p.p_s));
        let fs = open_state(-3e-4, -3e-4);
        let gs = glottal_flow(&fs, 0.0, &p, A0, Mode::Exact);
        assert_eq!(driving_forces(&fs, &gs, &p, Mode::Exact), (a1 * p.p_s, 0.0));
    }

    #[test]
    fn smooth_forces_at_half_gates() {
        let p = pp();
        let fs = open_state(p.x_min1, p.x_min2);
        let gs = glottal_flow(&fs, 0.0, &p, A0, smooth_mode());
        let (f1, _) = driving_forces(&fs, &gs, &p, smooth_mode());
        let expected = p.l_g * p.d_1 * (gs.p1 + 3.0 * p.p_s) / 4.0;
        assert!((f1 - expected).abs() < 1e-15);
    }

    #[test]
    fn acceleration_and_residual_are_inverse() {
        let p = pp();
        assert_eq!(fold_acceleration(&FoldState::at_rest(), (0.0, 0.0), &p, Mode::Exact), (0.0, 0.0));
        let fs = open_state(1e-4, 0.0);
        let a = fold_acceleration(&fs, (0.0, 0.0), &p, Mode::Exact);
        assert!((a.1 - 100.0).abs() < 1e-9, "{a:?}");
        let fs = FoldState {
            x1: 5e-5,
            x2: -2.5e-4,
            v1: 0.1,
            v2: -0.3,
        };
        for mode in [Mode::Exact, smooth_mode()] {
            let f = (0.01, -0.002);
            let a = fold_acceleration(&fs, f, &p, mode);
            let r = fold_residuals(&fs, a, f, &p, mode);
            assert!(r.0.abs() < 1e-15 && r.1.abs() < 1e-15, "{r:?}");
            // slope in acceleration equals the mass
            let r2 = fold_residuals(&fs, (a.0 + 1.0, a.1), f, &p, mode);
            assert!((r2.0 - r.0 - p.m_1).abs() < 1e-15);
        }
    }

    #[test]
    fn smooth_converges_to_exact() {
        let p = pp();
        let mut prev = f64::INFINITY;
        for scale in [1.0, 10.0, 100.0] {
            let sc = SmoothingCoefficients {
                beta_ag: 1e4 * scale,
                beta_f: 1e4 * scale,
                beta_p: 0.01 * scale,
            };
            let mut worst: f64 = 0.0;
            for i in 0..12 {
                let x1 = -4e-4 + 7e-5 * i as f64;
                let fs = open_state(x1, x1 + 3e-5);
                let e = glottal_flow(&fs, 100.0, &p, A0, Mode::Exact);
                let s = glottal_flow(&fs, 100.0, &p, A0, Mode::Smooth(sc));
                worst = worst.max((e.u_g - s.u_g).abs());
            }
            assert!(worst < prev, "{worst} !< {prev}");
            prev = worst;
        }
    }

    #[test]
    fn smooth_flow_derivative_via_jets() {
        // d u_g / d x1 from a jet in the time slot vs central difference
        let p = pp();
        let sc = SmoothingCoefficients::default();
        let x1 = Jet2::new(-1.0e-4, Some(1.0), None, None);
        let x2 = Jet2::constant(5.0e-5);
        let p0 = Jet2::constant(120.0);
        let ps = Jet2::constant(p.p_s);
        let u = smooth::flow(&x1, &x2, &p0, &ps, &p, A0, &sc).u_g;
        let f = |x: f64| smooth::flow(&x, &5.0e-5, &120.0, &p.p_s, &p, A0, &sc).u_g;
        let h = 1e-9;
        let fd = (f(-1.0e-4 + h) - f(-1.0e-4 - h)) / (2.0 * h);
        assert!((u.t.unwrap() - fd).abs() / fd.abs() < 1e-6);
    }
}
