//! Simulation configuration and its flat `key = value` text form.
//!
//! Keys follow the parameter names of the simulation table (`sigma_n2`, `L`,
//! `K`, `tau`, `mu`, `nu`, `f_c`, `N_s`, `t_s`, `a0`, `h_hat0`, `q0`, `p1`,
//! `s1`) plus experiment controls. Keys are case-insensitive; `#` starts a
//! comment.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CovarianceDerivative, EstimatorKind, TrackerConfig};
use crate::scenario::{sir_to_sigma_c, ContaminationMode};

/// Mobility grid (km/h) used by default for mobility sweeps.
pub const DEFAULT_MOBILITY_GRID: [f64; 8] = [1.0, 3.0, 10.0, 30.0, 50.0, 70.0, 100.0, 130.0];
/// Contamination power used when neither `sigma_c2` nor `sir_db` is given.
pub const DEFAULT_SIGMA_C2: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub sigma_n2: f64,
    #[serde(rename = "L")]
    pub cells: usize,
    #[serde(rename = "K")]
    pub users: usize,
    pub tau: usize,
    pub mu: f64,
    pub nu: f64,
    pub f_c: f64,
    #[serde(rename = "N_s")]
    pub n_scatterers: usize,
    pub t_s: f64,
    pub a0: f64,
    pub h_hat0: Complex64,
    pub q0: Complex64,
    pub p1: f64,
    pub s1: f64,
    pub sigma_c2: Option<f64>,
    pub sir_db: Option<f64>,
    pub v_kmh: Vec<f64>,
    pub mode: ContaminationMode,
    pub hopping: bool,
    pub n_slots: usize,
    pub n_realizations: usize,
    pub burn_in: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    /// Fixed coefficient of the conventional Kalman filter; `None` uses the
    /// lag-one Clarke autocorrelation at the simulated mobility.
    pub kalman_a: Option<f64>,
    pub covariance_derivative: CovarianceDerivative,
    /// Tracker gradient scale; `None` uses `tau`, the energy of a pilot with
    /// unit-modulus entries, which is the reference `mu` and `nu` assume.
    pub gradient_scale: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sigma_n2: 0.2,
            cells: 7,
            users: 96,
            tau: 96,
            mu: 1e-5,
            nu: 100.0,
            f_c: 1.8e9,
            n_scatterers: 20,
            t_s: 0.5e-3,
            a0: 0.5,
            h_hat0: Complex64::new(0.0, 0.0),
            q0: Complex64::new(0.0, 0.0),
            p1: 0.0,
            s1: 0.0,
            sigma_c2: None,
            sir_db: None,
            v_kmh: DEFAULT_MOBILITY_GRID.to_vec(),
            mode: ContaminationMode::Idealized,
            hopping: true,
            n_slots: 10_000,
            n_realizations: 100,
            burn_in: 500,
            master_seed: 1,
            estimators: vec![
                EstimatorKind::Ls,
                EstimatorKind::Mmse,
                EstimatorKind::Kalman,
                EstimatorKind::ModKalman,
                EstimatorKind::Predictor,
            ],
            kalman_a: None,
            covariance_derivative: CovarianceDerivative::Exact,
            gradient_scale: None,
        }
    }
}

const KEYS: &[&str] = &[
    "sigma_n2",
    "l",
    "k",
    "tau",
    "mu",
    "nu",
    "f_c",
    "n_s",
    "t_s",
    "a0",
    "h_hat0",
    "q0",
    "p1",
    "s1",
    "sigma_c2",
    "sir_db",
    "v_kmh",
    "mode",
    "hopping",
    "n_slots",
    "n_realizations",
    "burn_in",
    "master_seed",
    "estimators",
    "kalman_a",
    "covariance_derivative",
    "gradient_scale",
];

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("key `{key}`: {msg}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| bad(key, format!("cannot parse `{value}`: {e}")))
}

fn complex(key: &str, value: &str) -> Result<Complex64> {
    let parts: Vec<&str> = value.split(',').collect();
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(key, re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(key, re)?, num(key, im)?)),
        _ => Err(bad(key, "expected `re` or `re,im`")),
    }
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn fmt_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{:?}", c.re)
    } else {
        format!("{:?},{:?}", c.re, c.im)
    }
}

impl SimConfig {
    /// Total contamination power after resolving `sigma_c2` / `sir_db`.
    pub fn resolved_sigma_c2(&self) -> f64 {
        match (self.sigma_c2, self.sir_db) {
            (Some(s), _) => s,
            (None, Some(db)) => sir_to_sigma_c(db),
            (None, None) => DEFAULT_SIGMA_C2,
        }
    }

    pub fn resolved_gradient_scale(&self) -> f64 {
        self.gradient_scale.unwrap_or(self.tau as f64)
    }

    pub fn tracker(&self, sigma_c2: f64) -> TrackerConfig {
        TrackerConfig {
            mu: self.mu,
            nu: self.nu,
            sigma_n2: self.sigma_n2,
            sigma_c2,
            a0: self.a0,
            h_hat0: self.h_hat0,
            q0: self.q0,
            p1: self.p1,
            s1: self.s1,
            gradient_scale: self.resolved_gradient_scale(),
            truncate: true,
            covariance_derivative: self.covariance_derivative,
        }
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim().to_ascii_lowercase();
        let v = value.trim();
        match k.as_str() {
            "sigma_n2" => self.sigma_n2 = num(&k, v)?,
            "l" => self.cells = num(&k, v)?,
            "k" => self.users = num(&k, v)?,
            "tau" => self.tau = num(&k, v)?,
            "mu" => self.mu = num(&k, v)?,
            "nu" => self.nu = num(&k, v)?,
            "f_c" => self.f_c = num(&k, v)?,
            "n_s" => self.n_scatterers = num(&k, v)?,
            "t_s" => self.t_s = num(&k, v)?,
            "a0" => self.a0 = num(&k, v)?,
            "h_hat0" => self.h_hat0 = complex(&k, v)?,
            "q0" => self.q0 = complex(&k, v)?,
            "p1" => self.p1 = num(&k, v)?,
            "s1" => self.s1 = num(&k, v)?,
            "sigma_c2" => self.sigma_c2 = Some(num(&k, v)?),
            "sir_db" => self.sir_db = Some(num(&k, v)?),
            "v_kmh" => self.v_kmh = list(&k, v)?,
            "mode" => self.mode = v.parse().map_err(|e| bad(&k, e))?,
            "hopping" => self.hopping = num(&k, v)?,
            "n_slots" => self.n_slots = num(&k, v)?,
            "n_realizations" => self.n_realizations = num(&k, v)?,
            "burn_in" => self.burn_in = num(&k, v)?,
            "master_seed" => self.master_seed = num(&k, v)?,
            "estimators" => self.estimators = EstimatorKind::parse_list(v).map_err(|e| bad(&k, e))?,
            "kalman_a" => {
                self.kalman_a = match v {
                    "auto" | "" => None,
                    _ => Some(num(&k, v)?),
                }
            }
            "gradient_scale" => {
                self.gradient_scale = match v {
                    "auto" | "" => None,
                    _ => Some(num(&k, v)?),
                }
            }
            "covariance_derivative" => {
                self.covariance_derivative = match v {
                    "exact" => CovarianceDerivative::Exact,
                    "published" => CovarianceDerivative::Published,
                    _ => return Err(bad(&k, "expected exact|published")),
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "unknown key `{}` (known: {})",
                    key.trim(),
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`, then validates.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        self.validate()
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_text(&text)
    }

    /// Renders every key in `key = value` form; parsing it back yields `self`.
    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        let floats = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "sigma_n2 = {:?}", self.sigma_n2);
        let _ = writeln!(out, "L = {}", self.cells);
        let _ = writeln!(out, "K = {}", self.users);
        let _ = writeln!(out, "tau = {}", self.tau);
        let _ = writeln!(out, "mu = {:?}", self.mu);
        let _ = writeln!(out, "nu = {:?}", self.nu);
        let _ = writeln!(out, "f_c = {:?}", self.f_c);
        let _ = writeln!(out, "N_s = {}", self.n_scatterers);
        let _ = writeln!(out, "t_s = {:?}", self.t_s);
        let _ = writeln!(out, "a0 = {:?}", self.a0);
        let _ = writeln!(out, "h_hat0 = {}", fmt_complex(self.h_hat0));
        let _ = writeln!(out, "q0 = {}", fmt_complex(self.q0));
        let _ = writeln!(out, "p1 = {:?}", self.p1);
        let _ = writeln!(out, "s1 = {:?}", self.s1);
        if let Some(s) = self.sigma_c2 {
            let _ = writeln!(out, "sigma_c2 = {s:?}");
        }
        if let Some(s) = self.sir_db {
            let _ = writeln!(out, "sir_db = {s:?}");
        }
        let _ = writeln!(out, "v_kmh = {}", floats(&self.v_kmh));
        let _ = writeln!(out, "mode = {}", self.mode);
        let _ = writeln!(out, "hopping = {}", self.hopping);
        let _ = writeln!(out, "n_slots = {}", self.n_slots);
        let _ = writeln!(out, "n_realizations = {}", self.n_realizations);
        let _ = writeln!(out, "burn_in = {}", self.burn_in);
        let _ = writeln!(out, "master_seed = {}", self.master_seed);
        let names: Vec<_> = self.estimators.iter().map(|e| e.name()).collect();
        let _ = writeln!(out, "estimators = {}", names.join(","));
        match self.kalman_a {
            Some(a) => {
                let _ = writeln!(out, "kalman_a = {a:?}");
            }
            None => {
                let _ = writeln!(out, "kalman_a = auto");
            }
        }
        let cd = match self.covariance_derivative {
            CovarianceDerivative::Exact => "exact",
            CovarianceDerivative::Published => "published",
        };
        let _ = writeln!(out, "covariance_derivative = {cd}");
        match self.gradient_scale {
            Some(g) => {
                let _ = writeln!(out, "gradient_scale = {g:?}");
            }
            None => {
                let _ = writeln!(out, "gradient_scale = auto");
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let range = |key: &str, ok: bool, msg: &str| if ok { Ok(()) } else { Err(bad(key, msg)) };
        if self.sigma_c2.is_some() && self.sir_db.is_some() {
            return Err(Error::Config(
                "`sigma_c2` and `sir_db` both given; set only one".into(),
            ));
        }
        range("sigma_n2", self.sigma_n2 >= 0.0 && self.sigma_n2.is_finite(), "must be finite and >= 0")?;
        range("L", self.cells >= 1, "must be >= 1")?;
        range("K", self.users >= 1, "must be >= 1")?;
        range("tau", self.tau >= self.users, "must be >= K")?;
        range("mu", self.mu >= 0.0 && self.mu.is_finite(), "must be finite and >= 0")?;
        range("nu", self.nu > 0.0, "must be > 0")?;
        range("f_c", self.f_c > 0.0 && self.f_c.is_finite(), "must be finite and > 0")?;
        range("N_s", self.n_scatterers >= 1, "must be >= 1")?;
        range("t_s", self.t_s > 0.0 && self.t_s.is_finite(), "must be finite and > 0")?;
        range("a0", (0.0..=1.0).contains(&self.a0), "must lie in [0, 1]")?;
        range("p1", self.p1 >= 0.0 && self.p1.is_finite(), "must be finite and >= 0")?;
        if let Some(s) = self.sigma_c2 {
            range("sigma_c2", s >= 0.0 && s.is_finite(), "must be finite and >= 0")?;
        }
        if let Some(db) = self.sir_db {
            range("sir_db", !db.is_nan() && db != f64::NEG_INFINITY, "must be a number or +inf")?;
        }
        range(
            "v_kmh",
            self.v_kmh.iter().all(|v| *v >= 0.0 && v.is_finite()),
            "speeds must be finite and >= 0",
        )?;
        range("n_slots", self.n_slots > self.burn_in, "must exceed burn_in")?;
        range("n_realizations", self.n_realizations >= 1, "must be >= 1")?;
        range("estimators", !self.estimators.is_empty(), "must not be empty")?;
        if let Some(a) = self.kalman_a {
            range("kalman_a", (0.0..=1.0).contains(&a), "must lie in [0, 1]")?;
        }
        if let Some(g) = self.gradient_scale {
            range("gradient_scale", g > 0.0 && g.is_finite(), "must be finite and > 0")?;
        }
        if self.mode == ContaminationMode::Explicit && self.cells < 2 && self.resolved_sigma_c2() > 0.0 {
            return Err(bad("L", "explicit contamination needs at least two cells"));
        }
        Ok(())
    }
}
