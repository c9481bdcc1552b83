//! Time-stepping reference solver.
//!
//! The folds are advanced by classical RK4 with the tract entrance
//! pressure frozen over the step. The tract is advanced by an explicit
//! forward-time, centered-space scheme on a staggered grid: pressure at
//! the nodes `i dx`, volume velocity at the half nodes `(i + 1/2) dx`.
//! The two end nodes own half cells; the glottal flow enters the first one
//! and the radiation load drains the last one. Wall losses and the
//! radiation conductance are taken implicitly, which costs nothing on a
//! diagonal and keeps the scheme stable up to the acoustic CFL limit.


use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{circumference, AreaFunction};
use crate::glottis::{self, FoldState, Mode};
use crate::io::Table;
use crate::params::{PhysicalParams, ReferenceConfig, SmoothingCoefficients};
use crate::tract::{radiation_load, wall_loss};

/// Magnitude beyond which a state value counts as a blow-up.
const BLOW_UP: f64 = 1e9;
/// Upper bound on stored rows of the p/u grids.
const MAX_GRID_ROWS: usize = 4096;

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct SimulationRecord {
    pub dt: f64,
    pub dx: f64,
    /// Spacing of the scalar series, s.
    pub sample_dt: f64,
    pub time: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub u_g: Vec<f64>,
    pub p0: Vec<f64>,
    pub p_l: Vec<f64>,
    /// Node positions of the stored grids, m.
    pub grid_x: Vec<f64>,
    pub grid_time: Vec<f64>,
    /// Pressure, one row per `grid_time` entry, one column per node.
    pub p_grid: Array2<f64>,
    /// Volume velocity at the nodes (half-node average inside).
    pub u_grid: Array2<f64>,
}

impl SimulationRecord {
    /// Index of the first scalar sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.time.partition_point(|&s| s < t)
    }

    pub fn series_table(&self) -> Table {
        let mut t = Table::new();
        t.push("t_s", self.time.clone());
        t.push("x1_m", self.x1.clone());
        t.push("x2_m", self.x2.clone());
        t.push("ug_m3s", self.u_g.clone());
        t.push("p0_pa", self.p0.clone());
        t.push("pl_pa", self.p_l.clone());
        t
    }

    /// Pressure grid in long form: one row per (time, node).
    pub fn grid_table(&self) -> Table {
        long_grid(&self.grid_time, &self.grid_x, &self.p_grid, &self.u_grid)
    }
}

fn long_grid(times: &[f64], xs: &[f64], p: &Array2<f64>, u: &Array2<f64>) -> Table {
    let n = times.len() * xs.len();
    let (mut tc, mut xc, mut pc, mut uc) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for (r, &t) in times.iter().enumerate() {
        for (c, &x) in xs.iter().enumerate() {
            tc.push(t);
            xc.push(x);
            pc.push(p[[r, c]]);
            uc.push(u[[r, c]]);
        }
    }
    let mut table = Table::new();
    table.push("t_s", tc);
    table.push("x_m", xc);
    table.push("p_pa", pc);
    table.push("u_m3s", uc);
    table
}

/// Simulates from rest for `cfg.duration` seconds with exact glottis physics.
pub fn simulate(
    pp: &PhysicalParams,
    af: &AreaFunction,
    cfg: &ReferenceConfig,
) -> Result<SimulationRecord> {
    simulate_with(pp, af, cfg, Mode::Exact)
}

/// [`simulate`] with a chosen glottis mode.
pub fn simulate_with(
    pp: &PhysicalParams,
    af: &AreaFunction,
    cfg: &ReferenceConfig,
    mode: Mode,
) -> Result<SimulationRecord> {
    let mut solver = Solver::new(pp, af, cfg.dx, cfg.dt, mode)?;
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let every = cfg.record_every.max(1);
    let n_samples = steps / every + 1;
    let grid_steps = ((cfg.grid_window / cfg.dt).round() as usize).min(steps);
    let grid_every = every.max(grid_steps.div_ceil(MAX_GRID_ROWS).max(1));
    let grid_start = steps - grid_steps;
    let grid_rows = if grid_steps == 0 {
        0
    } else {
        (steps - grid_start) / grid_every + 1
    };
    let nodes = solver.n + 1;
    let mut rec = SimulationRecord {
        dt: cfg.dt,
        dx: solver.dx,
        sample_dt: cfg.dt * every as f64,
        time: Vec::with_capacity(n_samples),
        x1: Vec::with_capacity(n_samples),
        x2: Vec::with_capacity(n_samples),
        u_g: Vec::with_capacity(n_samples),
        p0: Vec::with_capacity(n_samples),
        p_l: Vec::with_capacity(n_samples),
        grid_x: (0..nodes).map(|i| i as f64 * solver.dx).collect(),
        grid_time: Vec::with_capacity(grid_rows),
        p_grid: Array2::zeros((grid_rows, nodes)),
        u_grid: Array2::zeros((grid_rows, nodes)),
    };
    let mut row = 0;
    for step in 0..=steps {
        let u_g = solver.glottal_flow();
        if step % every == 0 {
            rec.time.push(step as f64 * cfg.dt);
            rec.x1.push(solver.folds.x1);
            rec.x2.push(solver.folds.x2);
            rec.u_g.push(u_g);
            rec.p0.push(solver.p[0]);
            rec.p_l.push(solver.p[solver.n]);
        }
        if grid_rows > 0 && step >= grid_start && (step - grid_start) % grid_every == 0 {
            rec.grid_time.push(step as f64 * cfg.dt);
            solver.write_grid_row(u_g, rec.p_grid.row_mut(row), rec.u_grid.row_mut(row));
            row += 1;
        }
        if step == steps {
            break;
        }
        solver.step(u_g);
        if step % 1024 == 0 {
            solver.check(step)?;
        }
    }
    solver.check(steps)?;
    Ok(rec)
}

struct Solver<'a> {
    pp: &'a PhysicalParams,
    mode: Mode,
    n: usize,
    dx: f64,
    dt: f64,
    a0: f64,
    folds: FoldState,
    /// Pressure at nodes 0..=n.
    p: Vec<f64>,
    /// Volume velocity at half nodes 0..n.
    u: Vec<f64>,
    /// Radiation state `u_l - p_l / R_r`.
    q: f64,
    /// Per node: `A / (K dt)` and the implicit denominator with `G`.
    node_cap: Vec<f64>,
    node_den: Vec<f64>,
    /// Per half node: `rho / (A dt)` and the implicit denominator with `R`.
    half_ind: Vec<f64>,
    half_den: Vec<f64>,
    r_r: f64,
    l_r: f64,
}

impl<'a> Solver<'a> {
    fn new(
        pp: &'a PhysicalParams,
        af: &AreaFunction,
        dx: f64,
        dt: f64,
        mode: Mode,
    ) -> Result<Self> {
        let cfl = pp.c_air * dt / dx;
        if !(cfl < 1.0) {
            return Err(Error::Cfl { cfl });
        }
        let n = (pp.l / dx).round() as usize;
        if n < 2 {
            return Err(Error::invalid("dx", format!("{dx} m leaves fewer than two cells")));
        }
        let dx = pp.l / n as f64;
        let mut node_cap = Vec::with_capacity(n + 1);
        let mut node_den = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let a = af.area(i as f64 * dx);
            let wl = wall_loss(a, circumference(a), pp)?;
            let cap = a / (pp.bulk_modulus * dt);
            node_cap.push(cap);
            node_den.push(cap + wl.g);
        }
        let mut half_ind = Vec::with_capacity(n);
        let mut half_den = Vec::with_capacity(n);
        for i in 0..n {
            let a = af.area((i as f64 + 0.5) * dx);
            let wl = wall_loss(a, circumference(a), pp)?;
            let ind = pp.rho / (a * dt);
            half_ind.push(ind);
            half_den.push(ind + wl.r);
        }
        let (r_r, l_r) = radiation_load(af.lip_area(), pp);
        // the lip node owns a half cell, so its capacitance is halved
        node_den[n] += 2.0 / (r_r * dx);
        Ok(Self {
            pp,
            mode,
            n,
            dx,
            dt,
            a0: af.entrance_area(),
            folds: FoldState::at_rest(),
            p: vec![0.0; n + 1],
            u: vec![0.0; n],
            q: 0.0,
            node_cap,
            node_den,
            half_ind,
            half_den,
            r_r,
            l_r,
        })
    }

    fn glottal_flow(&self) -> f64 {
        glottis::glottal_flow(&self.folds, self.p[0], self.pp, self.a0, self.mode).u_g
    }

    fn derivative(&self, fs: &FoldState, p0: f64) -> [f64; 4] {
        let gs = glottis::glottal_flow(fs, p0, self.pp, self.a0, self.mode);
        let f = glottis::driving_forces(fs, &gs, self.pp, self.mode);
        let (a1, a2) = glottis::fold_acceleration(fs, f, self.pp, self.mode);
        [fs.v1, fs.v2, a1, a2]
    }

    fn step(&mut self, u_g_old: f64) {
        let dt = self.dt;
        let p0 = self.p[0];
        let s0 = self.folds;
        let shift = |d: &[f64; 4], h: f64| FoldState {
            x1: s0.x1 + h * d[0],
            x2: s0.x2 + h * d[1],
            v1: s0.v1 + h * d[2],
            v2: s0.v2 + h * d[3],
        };
        let k1 = self.derivative(&s0, p0);
        let k2 = self.derivative(&shift(&k1, 0.5 * dt), p0);
        let k3 = self.derivative(&shift(&k2, 0.5 * dt), p0);
        let k4 = self.derivative(&shift(&k3, dt), p0);
        let mut d = [0.0; 4];
        for i in 0..4 {
            d[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        }
        self.folds = shift(&d, dt);
        let u_g_new = self.glottal_flow();
        let inflow = 0.5 * (u_g_old + u_g_new);

        let inv_dx = 1.0 / self.dx;
        for i in 0..self.n {
            let grad = (self.p[i + 1] - self.p[i]) * inv_dx;
            self.u[i] = (self.half_ind[i] * self.u[i] - grad) / self.half_den[i];
        }
        let n = self.n;
        self.p[0] = (self.node_cap[0] * self.p[0] - 2.0 * (self.u[0] - inflow) * inv_dx)
            / self.node_den[0];
        for i in 1..n {
            let div = (self.u[i] - self.u[i - 1]) * inv_dx;
            self.p[i] = (self.node_cap[i] * self.p[i] - div) / self.node_den[i];
        }
        self.p[n] = (self.node_cap[n] * self.p[n] - 2.0 * (self.q - self.u[n - 1]) * inv_dx)
            / self.node_den[n];
        self.q += dt * self.p[n] / self.l_r;
    }

    fn lip_flow(&self) -> f64 {
        self.q + self.p[self.n] / self.r_r
    }

    fn write_grid_row(
        &self,
        u_g: f64,
        mut p_row: ndarray::ArrayViewMut1<f64>,
        mut u_row: ndarray::ArrayViewMut1<f64>,
    ) {
        for (dst, src) in p_row.iter_mut().zip(&self.p) {
            *dst = *src;
        }
        u_row[0] = u_g;
        for i in 1..self.n {
            u_row[i] = 0.5 * (self.u[i - 1] + self.u[i]);
        }
        u_row[self.n] = self.lip_flow();
    }

    fn check(&self, step: usize) -> Result<()> {
        let fs = &self.folds;
        let folds_ok = fs.is_finite() && fs.x1.abs() < BLOW_UP && fs.x2.abs() < BLOW_UP;
        if !folds_ok {
            return Err(Error::BlowUp {
                step,
                what: format!("fold state {:?}", fs),
            });
        }
        let bad = |v: &f64| !(v.abs() < BLOW_UP);
        if let Some(i) = self.p.iter().position(bad) {
            return Err(Error::BlowUp {
                step,
                what: format!("pressure {} at node {i}", self.p[i]),
            });
        }
        if let Some(i) = self.u.iter().position(bad) {
            return Err(Error::BlowUp {
                step,
                what: format!("volume velocity {} at half node {i}", self.u[i]),
            });
        }
        Ok(())
    }
}

/// Period of a steady oscillation from its normalised autocorrelation.
///
/// For each lag `k` the score is `2 sum x_i x_(i+k) / sum (x_i^2 + x_(i+k)^2)`
/// over the overlapping part of the mean-removed series. It equals 1 at a
/// lag that is an exact period and stays in [-1, 1]. The period is the
/// first local maximum beyond the first negative score that reaches 90% of
/// the largest such peak, refined by a parabola through its neighbours.
pub fn extract_period(series: &[f64], dt: f64) -> Result<f64> {
    let n = series.len();
    if n < 8 {
        return Err(Error::TooShort(format!("{n} samples")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if !(energy > 0.0) {
        return Err(Error::NoOscillation("series is constant".into()));
    }
    let r = autocorrelation(&x);
    let mut head = vec![0.0; n + 1];
    for i in 0..n {
        head[i + 1] = head[i] + x[i] * x[i];
    }
    let max_lag = n / 2;
    let score: Vec<f64> = (0..max_lag)
        .map(|k| {
            // overlap energies: x_0..x_(n-k) and x_k..x_n
            let e = head[n - k] + (head[n] - head[k]);
            if e > 0.0 {
                2.0 * r[k] / e
            } else {
                0.0
            }
        })
        .collect();
    let Some(first_neg) = score.iter().position(|&v| v < 0.0) else {
        return Err(Error::NoOscillation("autocorrelation never crosses zero".into()));
    };
    let peaks: Vec<usize> = (first_neg.max(1)..max_lag - 1)
        .filter(|&k| score[k] > score[k - 1] && score[k] >= score[k + 1])
        .collect();
    let best = peaks.iter().map(|&k| score[k]).fold(f64::NEG_INFINITY, f64::max);
    if !(best >= 0.5) {
        return Err(Error::NoOscillation(format!(
            "autocorrelation peak {best:.3} below 0.5"
        )));
    }
    let k = *peaks.iter().find(|&&k| score[k] >= 0.9 * best).unwrap();
    let (a, b, c) = (score[k - 1], score[k], score[k + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Ok((k as f64 + offset) * dt)
}

/// Raw lagged products `sum x_i x_(i+k)` for `k` in `0..n`, via FFT.
fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / size as f64;
    (0..n).map(|k| buf[k].re * scale).collect()
}

/// One steady cycle resampled on a uniform phase grid.
///
/// Sample `k` sits at `start + k T / (samples - 1)`, so the first and the
/// last sample are one period apart.
#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub period: f64,
    /// Absolute time of the first sample, s.
    pub start: f64,
    /// Time since `start`, s.
    pub time: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub u_g: Vec<f64>,
    pub p0: Vec<f64>,
    pub p_l: Vec<f64>,
    pub grid_x: Vec<f64>,
    /// Pressure over the cycle, one row per phase sample; empty when the
    /// record's grid window does not cover the cycle.
    pub p_grid: Array2<f64>,
    pub u_grid: Array2<f64>,
    /// Largest first-versus-last mismatch relative to the series range.
    pub closure: f64,
}

impl CycleRecord {
    pub fn series_table(&self) -> Table {
        let mut t = Table::new();
        t.push("t_s", self.time.clone());
        t.push("x1_m", self.x1.clone());
        t.push("x2_m", self.x2.clone());
        t.push("ug_m3s", self.u_g.clone());
        t.push("p0_pa", self.p0.clone());
        t.push("pl_pa", self.p_l.clone());
        t
    }

    pub fn grid_table(&self) -> Table {
        long_grid(&self.time, &self.grid_x, &self.p_grid, &self.u_grid)
    }

    /// Sampling rate of the phase grid, Hz.
    pub fn rate(&self) -> f64 {
        (self.time.len() - 1) as f64 / self.period
    }
}

/// Extracts the last full cycle of `rec`, starting at an upward crossing of
/// the mean glottal flow.
pub fn extract_steady_cycle(
    rec: &SimulationRecord,
    period: f64,
    samples: usize,
    closure_tol: f64,
) -> Result<CycleRecord> {
    if samples < 2 {
        return Err(Error::invalid("cycle_samples", "need at least two samples"));
    }
    let (Some(&t_first), Some(&t_end)) = (rec.time.first(), rec.time.last()) else {
        return Err(Error::TooShort("empty record".into()));
    };
    if t_end - t_first < 2.0 * period {
        return Err(Error::TooShort(format!(
            "record spans {:.3e} s, need two periods ({:.3e} s)",
            t_end - t_first,
            2.0 * period
        )));
    }
    let start = cycle_start(rec, period, t_end);
    let times: Vec<f64> = (0..samples)
        .map(|k| start + period * k as f64 / (samples - 1) as f64)
        .collect();
    let resample = |s: &[f64]| -> Vec<f64> {
        times.iter().map(|&t| interp(&rec.time, s, t)).collect()
    };
    let x1 = resample(&rec.x1);
    let x2 = resample(&rec.x2);
    let u_g = resample(&rec.u_g);
    let p0 = resample(&rec.p0);
    let p_l = resample(&rec.p_l);
    let closure = [&x1, &x2, &u_g, &p_l]
        .iter()
        .map(|s| closure_error(s))
        .fold(0.0, f64::max);
    if closure > closure_tol {
        return Err(Error::NotSteady {
            closure,
            tol: closure_tol,
        });
    }
    let covered = match (rec.grid_time.first(), rec.grid_time.last()) {
        (Some(&a), Some(&b)) => a <= start && b >= start + period * (1.0 - 1e-12),
        _ => false,
    };
    let nodes = rec.grid_x.len();
    let (p_grid, u_grid) = if covered {
        let mut p = Array2::zeros((samples, nodes));
        let mut u = Array2::zeros((samples, nodes));
        for (r, &t) in times.iter().enumerate() {
            let t = t.min(*rec.grid_time.last().unwrap());
            let j = rec.grid_time.partition_point(|&s| s <= t).clamp(1, rec.grid_time.len() - 1);
            let (ta, tb) = (rec.grid_time[j - 1], rec.grid_time[j]);
            let w = (t - ta) / (tb - ta);
            for c in 0..nodes {
                p[[r, c]] = (1.0 - w) * rec.p_grid[[j - 1, c]] + w * rec.p_grid[[j, c]];
                u[[r, c]] = (1.0 - w) * rec.u_grid[[j - 1, c]] + w * rec.u_grid[[j, c]];
            }
        }
        (p, u)
    } else {
        (Array2::zeros((0, nodes)), Array2::zeros((0, nodes)))
    };
    Ok(CycleRecord {
        period,
        start,
        time: times.iter().map(|t| t - start).collect(),
        x1,
        x2,
        u_g,
        p0,
        p_l,
        grid_x: rec.grid_x.clone(),
        p_grid,
        u_grid,
        closure,
    })
}

fn cycle_start(rec: &SimulationRecord, period: f64, t_end: f64) -> f64 {
    let lo = rec.index_at(t_end - 2.0 * period);
    let hi = rec.index_at(t_end - period).min(rec.time.len() - 1);
    let window = &rec.u_g[lo..=hi];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let mut start = t_end - period;
    for i in (lo + 1..=hi).rev() {
        let (a, b) = (rec.u_g[i - 1] - mean, rec.u_g[i] - mean);
        if a < 0.0 && b >= 0.0 {
            let w = a / (a - b);
            start = rec.time[i - 1] + w * (rec.time[i] - rec.time[i - 1]);
            break;
        }
    }
    start.min(t_end - period)
}

fn closure_error(s: &[f64]) -> f64 {
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if range == 0.0 {
        0.0
    } else {
        (s[0] - s[s.len() - 1]).abs() / range
    }
}

/// Linear interpolation in a sorted abscissa, clamped at the ends.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|&s| s <= x);
    let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    (1.0 - w) * ys[j - 1] + w * ys[j]
}

/// RMS difference between the last two cycles of `series`, relative to the
/// RMS of the last cycle (mean removed).
pub fn cycle_to_cycle_deviation(time: &[f64], series: &[f64], period: f64) -> Result<f64> {
    let t_end = *time.last().ok_or_else(|| Error::TooShort("empty series".into()))?;
    if t_end - time[0] < 2.0 * period {
        return Err(Error::TooShort("need two periods".into()));
    }
    let m = 512;
    let mut last = Vec::with_capacity(m);
    let mut prev = Vec::with_capacity(m);
    for k in 0..m {
        let t = t_end - period + period * k as f64 / m as f64;
        last.push(interp(time, series, t));
        prev.push(interp(time, series, t - period));
    }
    let mean = last.iter().sum::<f64>() / m as f64;
    let rms = (last.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
    let diff = (last
        .iter()
        .zip(&prev)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / m as f64)
        .sqrt();
    if rms == 0.0 {
        return Err(Error::NoOscillation("flat cycle".into()));
    }
    Ok(diff / rms)
}

/// Result of a full reference run.
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub record: SimulationRecord,
    pub period: f64,
    pub cycle: CycleRecord,
    /// Cycle-to-cycle RMS deviation of the glottal flow.
    pub steadiness: f64,
}

impl ReferenceRun {
    pub fn report(&self) -> String {
        let peak = self.cycle.u_g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        format!(
            "period_s={:e}\nf0_hz={:e}\npeak_ug_m3s={:e}\nclosure={:e}\ncycle_rms_deviation={:e}\n",
            self.period,
            1.0 / self.period,
            peak,
            self.cycle.closure,
            self.steadiness
        )
    }
}

/// Simulates, discards the transient, and extracts period and last cycle.
pub fn run(
    pp: &PhysicalParams,
    af: &AreaFunction,
    cfg: &ReferenceConfig,
    mode: Mode,
) -> Result<ReferenceRun> {
    let record = simulate_with(pp, af, cfg, mode)?;
    let from = record.index_at(cfg.transient);
    let period = extract_period(&record.u_g[from..], record.sample_dt)?;
    let cycle = extract_steady_cycle(&record, period, cfg.cycle_samples, cfg.closure_tol)?;
    let steadiness = cycle_to_cycle_deviation(&record.time[from..], &record.u_g[from..], period)?;
    Ok(ReferenceRun {
        record,
        period,
        cycle,
        steadiness,
    })
}

/// Smooth-versus-exact comparison of the reference solution.
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub smoothing: SmoothingCoefficients,
    pub period_exact: f64,
    /// `None` when the smooth run does not oscillate.
    pub period_smooth: Option<f64>,
    /// `|T_smooth - T_exact| / T_exact`.
    pub period_shift: f64,
    /// RMS of the phase-aligned glottal-flow difference over one cycle,
    /// relative to the RMS of the exact cycle.
    pub waveform_deviation: f64,
    /// Set when the period shift exceeds [`CALIBRATION_THRESHOLD`].
    pub flagged: bool,
}

/// Largest acceptable relative period shift of the smooth physics.
pub const CALIBRATION_THRESHOLD: f64 = 0.02;

impl CalibrationReport {
    pub fn summary(&self) -> String {
        format!(
            "beta_ag={:e} beta_f={:e} beta_p={:e} period_exact={:e} period_smooth={} \
             period_shift={:e} waveform_deviation={:e} flagged={}",
            self.smoothing.beta_ag,
            self.smoothing.beta_f,
            self.smoothing.beta_p,
            self.period_exact,
            self.period_smooth.map_or("none".to_string(), |t| format!("{t:e}")),
            self.period_shift,
            self.waveform_deviation,
            self.flagged
        )
    }
}

/// Reruns the solver with smooth glottis physics and compares against `exact`.
pub fn calibrate_smoothing(
    pp: &PhysicalParams,
    af: &AreaFunction,
    cfg: &ReferenceConfig,
    sc: SmoothingCoefficients,
    exact: &ReferenceRun,
) -> Result<CalibrationReport> {
    let smooth = match run(pp, af, cfg, Mode::Smooth(sc)) {
        Ok(r) => Some(r),
        Err(Error::NoOscillation(_) | Error::NotSteady { .. } | Error::TooShort(_)) => None,
        Err(e) => return Err(e),
    };
    let Some(smooth) = smooth else {
        return Ok(CalibrationReport {
            smoothing: sc,
            period_exact: exact.period,
            period_smooth: None,
            period_shift: f64::INFINITY,
            waveform_deviation: f64::INFINITY,
            flagged: true,
        });
    };
    let period_shift = (smooth.period - exact.period).abs() / exact.period;
    let waveform_deviation = aligned_rms_deviation(&exact.cycle.u_g, &smooth.cycle.u_g);
    Ok(CalibrationReport {
        smoothing: sc,
        period_exact: exact.period,
        period_smooth: Some(smooth.period),
        period_shift,
        waveform_deviation,
        flagged: period_shift > CALIBRATION_THRESHOLD,
    })
}

/// Minimum over circular shifts of `rms(b - a) / rms(a)` for two cycles on
/// phase grids of equal length whose last sample repeats the first.
pub fn aligned_rms_deviation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) - 1;
    let rms_a = (a[..n].iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let mut best = f64::INFINITY;
    for shift in 0..n {
        let s: f64 = (0..n).map(|k| (b[(k + shift) % n] - a[k]).powi(2)).sum();
        best = best.min(s);
    }
    (best / n as f64).sqrt() / rms_a
}

/// Best circular shift of `b` onto `a` and the resulting Pearson correlation.
pub fn aligned_correlation(a: &[f64], b: &[f64]) -> (usize, f64) {
    let n = a.len().min(b.len());
    let mut best = (0, f64::NEG_INFINITY);
    for shift in 0..n {
        let shifted: Vec<f64> = (0..n).map(|k| b[(k + shift) % n]).collect();
        let r = pearson(&a[..n], &shifted);
        if r > best.1 {
            best = (shift, r);
        }
    }
    best
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Phase `2 pi t / period`.
    fn phase(t: f64, period: f64) -> f64 {
        2.0 * PI * t / period
    }

    fn uniform_tube(pp: &PhysicalParams) -> AreaFunction {
        AreaFunction::new(&[(0.0, 3e-4), (pp.l, 3e-4)], pp.l).unwrap()
    }

    fn coarse() -> ReferenceConfig {
        ReferenceConfig {
            dx: 2e-3,
            dt: 2e-6,
            duration: 0.05,
            transient: 0.02,
            grid_window: 0.01,
            ..Default::default()
        }
    }

    #[test]
    fn period_of_pure_sinusoid() {
        let dt = 1e-5;
        let s: Vec<f64> = (0..5000).map(|i| (phase(i as f64 * dt, 5e-3)).sin()).collect();
        let t = extract_period(&s, dt).unwrap();
        assert!((t - 5e-3).abs() < 1e-5, "{t}");
    }

    #[test]
    fn period_survives_noise() {
        let dt = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..5000)
            .map(|i| phase(i as f64 * dt, 5e-3).sin() + 0.1 * rng.gen_range(-1.0..1.0))
            .collect();
        let t = extract_period(&s, dt).unwrap();
        assert!((t - 5e-3).abs() / 5e-3 < 5e-3, "{t}");
    }

    #[test]
    fn constant_series_has_no_period() {
        assert!(matches!(
            extract_period(&[2.0; 1000], 1e-5),
            Err(Error::NoOscillation(_))
        ));
    }

    #[test]
    fn harmonic_rich_series_reports_fundamental() {
        let dt = 1e-5;
        let s: Vec<f64> = (0..8000)
            .map(|i| {
                let p = phase(i as f64 * dt, 4e-3);
                p.sin() + 0.8 * (2.0 * p).sin() + 0.6 * (3.0 * p).cos()
            })
            .collect();
        let t = extract_period(&s, dt).unwrap();
        assert!((t - 4e-3).abs() < 1e-5, "{t}");
    }

    fn synthetic_record(period: f64, span: f64) -> SimulationRecord {
        let dt = 1e-5;
        let n = (span / dt) as usize + 1;
        let time: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let wave = |t: f64| phase(t, period).sin();
        SimulationRecord {
            dt,
            dx: 1e-3,
            sample_dt: dt,
            x1: time.iter().map(|&t| 1e-4 * wave(t)).collect(),
            x2: time.iter().map(|&t| 1e-4 * phase(t, period).cos()).collect(),
            u_g: time.iter().map(|&t| 2e-4 + 1e-4 * wave(t)).collect(),
            p0: time.iter().map(|&t| 100.0 * wave(t)).collect(),
            p_l: time.iter().map(|&t| 10.0 * wave(t)).collect(),
            time,
            grid_x: vec![],
            grid_time: vec![],
            p_grid: Array2::zeros((0, 0)),
            u_grid: Array2::zeros((0, 0)),
        }
    }

    #[test]
    fn periodic_record_closes_exactly() {
        // period is a whole number of samples so both ends land on grid points
        let rec = synthetic_record(5e-3, 0.03);
        let c = extract_steady_cycle(&rec, 5e-3, 101, 1e-2).unwrap();
        assert!(c.closure < 1e-9, "{}", c.closure);
        assert_eq!(c.time.len(), 101);
        assert!((c.time[100] - 5e-3).abs() < 1e-15);
        // cycle starts at an upward mean crossing of u_g
        assert!((c.u_g[0] - 2e-4).abs() < 1e-8);
        assert!(c.u_g[1] > c.u_g[0]);
    }

    #[test]
    fn short_record_is_rejected() {
        let rec = synthetic_record(5e-3, 8e-3);
        assert!(matches!(
            extract_steady_cycle(&rec, 5e-3, 64, 1e-2),
            Err(Error::TooShort(_))
        ));
    }

    #[test]
    fn drifting_record_is_not_steady() {
        let mut rec = synthetic_record(5e-3, 0.03);
        for (v, t) in rec.u_g.iter_mut().zip(&rec.time) {
            *v += 1e-4 * t / 5e-3;
        }
        assert!(matches!(
            extract_steady_cycle(&rec, 5e-3, 64, 1e-2),
            Err(Error::NotSteady { .. })
        ));
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let pp = PhysicalParams::default();
        let cfg = ReferenceConfig {
            dx: 1e-3,
            dt: 3e-6,
            ..coarse()
        };
        assert!(matches!(
            simulate(&pp, &uniform_tube(&pp), &cfg),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn zero_pressure_stays_at_rest() {
        let mut pp = PhysicalParams::default();
        pp.p_s = 0.0;
        let rec = simulate(&pp, &uniform_tube(&pp), &coarse()).unwrap();
        let last = rec.time.len() - 1;
        assert!(rec.x1[last].abs() < 1e-8 && rec.x2[last].abs() < 1e-8);
        assert!(rec.u_g.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn flow_is_never_negative_and_grids_are_consistent() {
        let pp = PhysicalParams::default();
        let rec = simulate(&pp, &uniform_tube(&pp), &coarse()).unwrap();
        assert!(rec.u_g.iter().all(|&u| u >= 0.0));
        assert!(rec.u_g.iter().any(|&u| u > 0.0));
        assert_eq!(rec.p_grid.dim(), (rec.grid_time.len(), rec.grid_x.len()));
        assert_eq!(rec.grid_x.len(), 81);
        let r = rec.grid_time.len() - 1;
        assert_eq!(rec.p_grid[[r, 80]], *rec.p_l.last().unwrap());
        assert_eq!(rec.p_grid[[r, 0]], *rec.p0.last().unwrap());
    }

    #[test]
    fn closed_tube_mode_frequencies() {
        // a pressure pulse in a lossless uniform tube behind a shut glottis
        // rings at odd multiples of c / 4l once the lip load is nearly a
        // short circuit
        let mut pp = PhysicalParams::default();
        pp.alpha_r = 0.0;
        pp.alpha_g = 0.0;
        pp.p_s = 0.0;
        pp.m_1 = 1e12;
        pp.m_2 = 1e12;
        let af = AreaFunction::new(&[(0.0, 3e-4), (pp.l, 3e-4)], pp.l).unwrap();
        let mut s = Solver::new(&pp, &af, 1e-3, 1e-6, Mode::Exact).unwrap();
        s.folds.x1 = 2.0 * pp.x_min1;
        s.r_r = 1e-9;
        s.node_den[s.n] = s.node_cap[s.n] + 2.0 / (s.r_r * s.dx);
        for i in 0..=s.n {
            let x = i as f64 * s.dx;
            s.p[i] = (-(x - 0.04f64).powi(2) / (2.0 * 0.01f64.powi(2))).exp();
        }
        let mut p0 = Vec::new();
        for _ in 0..40000 {
            s.step(0.0);
            p0.push(s.p[0]);
        }
        let t = extract_period(&p0, 1e-6).unwrap();
        let expect = 4.0 * pp.l / pp.c_air;
        assert!((t - expect).abs() / expect < 5e-3, "{t} vs {expect}");
    }

    #[test]
    fn aligned_measures() {
        let n = 64;
        let a: Vec<f64> = (0..=n).map(|k| phase(k as f64, n as f64).sin()).collect();
        let b: Vec<f64> = (0..=n).map(|k| phase(k as f64 + 5.0, n as f64).sin()).collect();
        assert!(aligned_rms_deviation(&a, &b) < 1e-12);
        let (shift, r) = aligned_correlation(&a[..n], &b[..n]);
        assert_eq!(shift, n - 5);
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }
}
