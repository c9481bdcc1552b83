//! Physical constants and run configuration.
//!
//! Everything is SI. The configuration file is TOML with four sections:
//! `[physics]`, `[smoothing]`, `[run]` and `[reference]`. Every key is
//! optional; omitted keys take the defaults below, which for `[physics]`
//! are the standard two-mass / acoustic-tube constants.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mechanical, aerodynamic and acoustic constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Subglottal pressure, Pa.
    pub p_s: f64,
    pub m_1: f64,
    pub m_2: f64,
    pub k_1: f64,
    pub k_2: f64,
    pub k_c: f64,
    pub c_1: f64,
    pub c_2: f64,
    pub eta_k1: f64,
    pub eta_k2: f64,
    pub h_1: f64,
    pub h_2: f64,
    pub eta_h1: f64,
    pub eta_h2: f64,
    /// Collision positions, m. Negative: the folds touch when displaced inward by this much.
    pub x_min1: f64,
    pub x_min2: f64,
    pub d_1: f64,
    pub d_2: f64,
    /// Fold length perpendicular to the flow, m.
    pub l_g: f64,
    pub rho: f64,
    /// Bulk modulus of air, Pa.
    #[serde(rename = "K")]
    pub bulk_modulus: f64,
    pub c_air: f64,
    pub mu: f64,
    pub eta_air: f64,
    pub lambda_air: f64,
    pub c_p: f64,
    pub alpha_r: f64,
    pub alpha_g: f64,
    pub omega_c: f64,
    /// Vocal-tract length, m.
    pub l: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            p_s: 785.0,
            m_1: 1.25e-4,
            m_2: 0.25e-4,
            k_1: 80.0,
            k_2: 8.0,
            k_c: 25.0,
            c_1: 0.020,
            c_2: 0.017,
            eta_k1: 1.0e6,
            eta_k2: 1.0e6,
            h_1: 240.0,
            h_2: 24.0,
            eta_h1: 5.0e6,
            eta_h2: 5.0e6,
            x_min1: -1.79e-4,
            x_min2: -1.79e-4,
            d_1: 2.5e-3,
            d_2: 0.5e-3,
            l_g: 1.4e-2,
            rho: 1.20,
            bulk_modulus: 1.39e5,
            c_air: 340.0,
            mu: 1.9e-5,
            eta_air: 1.40,
            lambda_air: 2.41e-2,
            c_p: 1.01e3,
            alpha_r: 25.0,
            alpha_g: 1.0,
            omega_c: 942.0,
            l: 0.16,
        }
    }
}

impl PhysicalParams {
    /// Rest glottal area of mass `j` (1 or 2): `-2 l_g x_min`.
    pub fn rest_area(&self, j: usize) -> f64 {
        -2.0 * self.l_g * self.x_min(j)
    }

    pub fn x_min(&self, j: usize) -> f64 {
        match j {
            1 => self.x_min1,
            2 => self.x_min2,
            _ => panic!("mass index must be 1 or 2, got {j}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_1", self.m_1),
            ("m_2", self.m_2),
            ("k_1", self.k_1),
            ("k_2", self.k_2),
            ("k_c", self.k_c),
            ("c_1", self.c_1),
            ("c_2", self.c_2),
            ("rho", self.rho),
            ("K", self.bulk_modulus),
            ("c_air", self.c_air),
            ("mu", self.mu),
            ("l", self.l),
            ("l_g", self.l_g),
            ("d_1", self.d_1),
            ("d_2", self.d_2),
        ];
        for (key, v) in positive {
            check_finite(key, v)?;
            if v <= 0.0 {
                return Err(Error::invalid(key, format!("must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("p_s", self.p_s),
            ("eta_k1", self.eta_k1),
            ("eta_k2", self.eta_k2),
            ("h_1", self.h_1),
            ("h_2", self.h_2),
            ("eta_h1", self.eta_h1),
            ("eta_h2", self.eta_h2),
            ("eta_air", self.eta_air),
            ("lambda_air", self.lambda_air),
            ("c_p", self.c_p),
            ("alpha_r", self.alpha_r),
            ("alpha_g", self.alpha_g),
            ("omega_c", self.omega_c),
        ];
        for (key, v) in non_negative {
            check_finite(key, v)?;
            if v < 0.0 {
                return Err(Error::invalid(key, format!("must be >= 0, got {v}")));
            }
        }
        for (key, v) in [("x_min1", self.x_min1), ("x_min2", self.x_min2)] {
            check_finite(key, v)?;
            if v >= 0.0 {
                return Err(Error::invalid(key, format!("must be < 0, got {v}")));
            }
        }
        if self.c_p == 0.0 {
            return Err(Error::invalid("c_p", "must be > 0"));
        }
        Ok(())
    }
}

/// Sharpness of the differentiable stand-ins for the glottal-closure switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingCoefficients {
    /// Softplus sharpness for the glottal area, 1/m.
    pub beta_ag: f64,
    /// Sigmoid sharpness for force and collision gates, 1/m.
    pub beta_f: f64,
    /// Softplus sharpness for the pressure drop, 1/Pa.
    pub beta_p: f64,
}

impl Default for SmoothingCoefficients {
    fn default() -> Self {
        Self {
            beta_ag: 5.0e4,
            beta_f: 5.0e4,
            beta_p: 0.05,
        }
    }
}

impl SmoothingCoefficients {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("beta_ag", self.beta_ag),
            ("beta_f", self.beta_f),
            ("beta_p", self.beta_p),
        ] {
            check_finite(key, v)?;
            if v <= 0.0 {
                return Err(Error::invalid(key, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Forward,
    Inverse,
    Reference,
}

/// Network, collocation and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: RunMode,
    pub epochs: usize,
    pub minibatches: usize,
    pub n_f: usize,
    pub n_t: usize,
    pub n_r: usize,
    /// Number of Fourier features on normalized time.
    pub fourier_features: usize,
    pub fold_width: usize,
    pub fold_blocks: usize,
    pub tract_width: usize,
    pub tract_blocks: usize,
    pub lambda_f: f64,
    pub lambda_t1: f64,
    pub lambda_t2: f64,
    pub lambda_r: f64,
    /// Radiation weight multiplier applied in inverse mode.
    pub inverse_lambda_r_factor: f64,
    pub lr_init: f64,
    pub lr_decay: f64,
    /// Initial period, s. Used when no reference period is supplied.
    pub t_init: f64,
    /// Relative offset of the initial trainable scalar (T or p_s) from its reference value.
    pub init_offset: f64,
    /// Output scales: networks emit O(1) values that are multiplied by these.
    pub x_scale: f64,
    pub p_scale: f64,
    pub u_scale: f64,
    /// Unit in which the trainable period is stored, s.
    pub period_unit: f64,
    /// Unit in which the trainable subglottal pressure is stored, Pa.
    pub pressure_unit: f64,
    pub snake_a: f64,
    pub seed: u64,
    /// Weight of the optional phase-anchoring term (0 disables it).
    pub phase_anchor: f64,
    /// Points per tape when a minibatch is split for parallel evaluation (0 = whole batch).
    pub chunk_size: usize,
    /// Abort when the epoch loss grows by this factor over `divergence_window` epochs.
    pub divergence_factor: f64,
    pub divergence_window: usize,
    /// Area table file, relative to the config file's directory.
    pub area_table: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::Forward,
            epochs: 20_000,
            minibatches: 12,
            n_f: 60_000,
            n_t: 500,
            n_r: 500,
            fourier_features: 16,
            fold_width: 200,
            fold_blocks: 3,
            tract_width: 200,
            tract_blocks: 5,
            lambda_f: 3.50e9,
            lambda_t1: 2.72e19,
            lambda_t2: 1.01e7,
            lambda_r: 1.00e10,
            inverse_lambda_r_factor: 10.0,
            lr_init: 6.25e-4,
            lr_decay: 1.25e-4,
            t_init: 6.2e-3,
            init_offset: 0.2,
            x_scale: 1.0e-3,
            p_scale: 1.0e3,
            u_scale: 1.0e-3,
            period_unit: 1.0e-3,
            pressure_unit: 1.0e2,
            snake_a: 1.0,
            seed: 0,
            phase_anchor: 0.0,
            chunk_size: 0,
            divergence_factor: 100.0,
            divergence_window: 100,
            area_table: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("epochs", self.epochs, true),
            ("minibatches", self.minibatches, false),
            ("n_f", self.n_f, false),
            ("n_t", self.n_t, false),
            ("n_r", self.n_r, false),
            ("fourier_features", self.fourier_features, false),
            ("fold_width", self.fold_width, false),
            ("fold_blocks", self.fold_blocks, true),
            ("tract_width", self.tract_width, false),
            ("tract_blocks", self.tract_blocks, true),
            ("divergence_window", self.divergence_window, false),
        ];
        for (key, v, zero_ok) in counts {
            if v == 0 && !zero_ok {
                return Err(Error::invalid(key, "must be a positive integer"));
            }
        }
        let positive = [
            ("lambda_f", self.lambda_f),
            ("lambda_t1", self.lambda_t1),
            ("lambda_t2", self.lambda_t2),
            ("lambda_r", self.lambda_r),
            ("inverse_lambda_r_factor", self.inverse_lambda_r_factor),
            ("lr_init", self.lr_init),
            ("t_init", self.t_init),
            ("x_scale", self.x_scale),
            ("p_scale", self.p_scale),
            ("u_scale", self.u_scale),
            ("period_unit", self.period_unit),
            ("pressure_unit", self.pressure_unit),
            ("snake_a", self.snake_a),
            ("divergence_factor", self.divergence_factor),
        ];
        for (key, v) in positive {
            check_finite(key, v)?;
            if v <= 0.0 {
                return Err(Error::invalid(key, format!("must be > 0, got {v}")));
            }
        }
        for (key, v) in [
            ("lr_decay", self.lr_decay),
            ("phase_anchor", self.phase_anchor),
        ] {
            check_finite(key, v)?;
            if v < 0.0 {
                return Err(Error::invalid(key, format!("must be >= 0, got {v}")));
            }
        }
        check_finite("init_offset", self.init_offset)?;
        if self.init_offset <= -1.0 {
            return Err(Error::invalid("init_offset", "must be > -1"));
        }
        if self.minibatches > self.n_f.min(self.n_t).min(self.n_r) {
            return Err(Error::invalid(
                "minibatches",
                "cannot exceed the smallest collocation count",
            ));
        }
        Ok(())
    }
}

/// Grid and window settings of the time-stepping solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub dx: f64,
    pub dt: f64,
    /// Total simulated time, s.
    pub duration: f64,
    /// Initial span discarded before period extraction, s.
    pub transient: f64,
    /// Samples on the phase grid of an extracted cycle.
    pub cycle_samples: usize,
    /// Store one sample every this many steps.
    pub record_every: usize,
    /// Span at the end of the run for which full p/u grids are stored, s.
    pub grid_window: f64,
    /// Relative cycle-closure tolerance.
    pub closure_tol: f64,
    pub lpc_order: usize,
    pub analysis_rate: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            dx: 1.0e-4,
            dt: 5.88e-8,
            duration: 0.5,
            transient: 0.3,
            cycle_samples: 256,
            record_every: 1,
            grid_window: 0.02,
            closure_tol: 1.0e-2,
            lpc_order: 12,
            analysis_rate: 1.0e4,
        }
    }
}

impl ReferenceConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("dx", self.dx),
            ("dt", self.dt),
            ("duration", self.duration),
            ("closure_tol", self.closure_tol),
            ("analysis_rate", self.analysis_rate),
        ] {
            check_finite(key, v)?;
            if v <= 0.0 {
                return Err(Error::invalid(key, format!("must be > 0, got {v}")));
            }
        }
        for (key, v) in [("transient", self.transient), ("grid_window", self.grid_window)] {
            check_finite(key, v)?;
            if v < 0.0 {
                return Err(Error::invalid(key, format!("must be >= 0, got {v}")));
            }
        }
        if self.transient >= self.duration {
            return Err(Error::invalid("transient", "must be shorter than duration"));
        }
        for (key, v) in [
            ("cycle_samples", self.cycle_samples),
            ("record_every", self.record_every),
            ("lpc_order", self.lpc_order),
        ] {
            if v == 0 {
                return Err(Error::invalid(key, "must be a positive integer"));
            }
        }
        Ok(())
    }
}

/// A fully loaded configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub physics: PhysicalParams,
    pub smoothing: SmoothingCoefficients,
    pub run: RunConfig,
    pub reference: ReferenceConfig,
    /// Directory that relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.smoothing.validate()?;
        self.run.validate()?;
        self.reference.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies a `section.key=value` override, re-validating afterwards.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::ConfigParse(format!("override `{assignment}` lacks `=`")))?;
        let (section, key) = path.trim().split_once('.').ok_or_else(|| {
            Error::ConfigParse(format!("override key `{path}` must be `section.key`"))
        })?;
        let mut doc: toml::Table = toml::from_str(&self.to_toml_string())
            .map_err(|e| Error::ConfigParse(e.to_string()))?;
        let parsed: toml::Value = format!("v = {}", value.trim())
            .parse::<toml::Table>()
            .map(|mut t| t.remove("v").expect("key present"))
            .unwrap_or_else(|_| toml::Value::String(value.trim().to_string()));
        doc.entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .ok_or_else(|| Error::ConfigParse(format!("`{section}` is not a section")))?
            .insert(key.to_string(), parsed);
        let base_dir = std::mem::take(&mut self.base_dir);
        let mut cfg = Config::parse(&toml::to_string(&doc).expect("table serializes"))?;
        cfg.base_dir = base_dir;
        *self = cfg;
        Ok(())
    }

    /// Resolved path of the configured area table, if any.
    pub fn area_table_path(&self) -> Option<PathBuf> {
        self.run.area_table.as_ref().map(|p| {
            if p.is_absolute() {
                p.clone()
            } else {
                self.base_dir.join(p)
            }
        })
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = Config::parse(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

fn check_finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(key, "must be finite"))
    }
}
