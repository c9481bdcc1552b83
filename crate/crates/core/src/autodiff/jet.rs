use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Real;

/// Truncated Taylor jet in two input directions.
///
/// `v` is the value, `t` and `tt` the first and second derivative along the
/// time input, `x` the first derivative along the space input. Absent slots
/// are structurally zero and cost nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2<T> {
    pub v: T,
    pub t: Option<T>,
    pub tt: Option<T>,
    pub x: Option<T>,
}

impl<T: Real> Jet2<T> {
    pub fn constant(v: T) -> Self {
        Self {
            v,
            t: None,
            tt: None,
            x: None,
        }
    }

    pub fn new(v: T, t: Option<T>, tt: Option<T>, x: Option<T>) -> Self {
        Self { v, t, tt, x }
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    ///
    /// `d2` is only evaluated when the second time slot is needed.
    pub fn chain(&self, f: T, d1: T, d2: impl FnOnce() -> T) -> Self {
        let t = self.t.clone().map(|at| d1.clone() * at);
        let tt = match (&self.t, &self.tt) {
            (Some(at), att) => {
                let curv = d2() * at.square();
                Some(match att {
                    Some(att) => curv + d1.clone() * att.clone(),
                    None => curv,
                })
            }
            (None, Some(att)) => Some(d1.clone() * att.clone()),
            (None, None) => None,
        };
        let x = self.x.clone().map(|ax| d1.clone() * ax);
        Self { v: f, t, tt, x }
    }

    /// Applies `f` to every present slot; valid for maps that are linear.
    pub fn map_linear(&self, f: impl Fn(&T) -> T) -> Self {
        Self {
            v: f(&self.v),
            t: self.t.as_ref().map(&f),
            tt: self.tt.as_ref().map(&f),
            x: self.x.as_ref().map(&f),
        }
    }
}

fn add_opt<T: Real>(a: Option<T>, b: Option<T>) -> Option<T> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a + b),
        (a, None) => a,
        (None, b) => b,
    }
}

impl<T: Real> Add for Jet2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            v: self.v + rhs.v,
            t: add_opt(self.t, rhs.t),
            tt: add_opt(self.tt, rhs.tt),
            x: add_opt(self.x, rhs.x),
        }
    }
}

impl<T: Real> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map_linear(|a| -a.clone())
    }
}

impl<T: Real> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Real> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let prod = |a: &Option<T>, bv: &T, b: &Option<T>, av: &T| {
            add_opt(
                a.clone().map(|a| a * bv.clone()),
                b.clone().map(|b| av.clone() * b),
            )
        };
        let t = prod(&self.t, &rhs.v, &rhs.t, &self.v);
        let mut tt = prod(&self.tt, &rhs.v, &rhs.tt, &self.v);
        if let (Some(at), Some(bt)) = (&self.t, &rhs.t) {
            tt = add_opt(tt, Some(at.clone() * bt.clone() * 2.0));
        }
        let x = prod(&self.x, &rhs.v, &rhs.x, &self.v);
        Self {
            v: self.v * rhs.v,
            t,
            tt,
            x,
        }
    }
}

impl<T: Real> Div for Jet2<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<T: Real> Add<f64> for Jet2<T> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.v = self.v + rhs;
        self
    }
}

impl<T: Real> Sub<f64> for Jet2<T> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.v = self.v - rhs;
        self
    }
}

impl<T: Real> Mul<f64> for Jet2<T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.map_linear(|a| a.clone() * rhs)
    }
}

impl<T: Real> Div<f64> for Jet2<T> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.map_linear(|a| a.clone() / rhs)
    }
}

impl<T: Real> Real for Jet2<T> {
    fn sqrt(&self) -> Self {
        let f = self.v.sqrt();
        let d1 = f.recip() * 0.5;
        let v = self.v.clone();
        self.chain(f, d1.clone(), || -(d1 / v) * 0.5)
    }

    fn exp(&self) -> Self {
        let f = self.v.exp();
        self.chain(f.clone(), f.clone(), || f)
    }

    fn ln(&self) -> Self {
        let r = self.v.recip();
        self.chain(self.v.ln(), r.clone(), || -r.square())
    }

    fn sin(&self) -> Self {
        let s = self.v.sin();
        self.chain(s.clone(), self.v.cos(), || -s)
    }

    fn cos(&self) -> Self {
        let c = self.v.cos();
        self.chain(c.clone(), -self.v.sin(), || -c)
    }

    fn recip(&self) -> Self {
        let r = self.v.recip();
        let r2 = r.square();
        self.chain(r.clone(), -r2.clone(), || r2 * r * 2.0)
    }

    fn softplus(&self) -> Self {
        let s = self.v.sigmoid();
        let d2 = || s.clone() * (-s.clone() + 1.0);
        self.chain(self.v.softplus(), s.clone(), d2)
    }

    fn sigmoid(&self) -> Self {
        let s = self.v.sigmoid();
        let d1 = s.clone() * (-s.clone() + 1.0);
        let d2 = {
            let d1 = d1.clone();
            let s = s.clone();
            move || d1 * (-(s * 2.0) + 1.0)
        };
        self.chain(s, d1, d2)
    }
}
