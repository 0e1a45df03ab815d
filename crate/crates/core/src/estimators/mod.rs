//! Channel estimators: LS, MMSE, conventional Kalman, Kalman with AR-coefficient
//! tracking, its one-step predictor variant, and a running average.

mod average;
mod kalman;
mod linear;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use average::RunningAverage;
pub use kalman::{
    kalman_gain, kalman_step, modified_kalman_step, predictor_step, whitened_pilot,
    CovarianceDerivative, FilterState, StepReport, TrackerConfig, DIVERGENCE_LIMIT,
};
pub use linear::{ls_estimate, mmse_estimate, Projection};

use crate::error::{Error, Result};

/// Variance of the unit-power channel. Fixed-coefficient filters start from
/// this error covariance since their initial estimate carries no information.
pub const PRIOR_VARIANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Ls,
    Mmse,
    Kalman,
    ModKalman,
    Predictor,
    Avg,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Ls,
        EstimatorKind::Mmse,
        EstimatorKind::Kalman,
        EstimatorKind::ModKalman,
        EstimatorKind::Predictor,
        EstimatorKind::Avg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Mmse => "mmse",
            EstimatorKind::Kalman => "kalman",
            EstimatorKind::ModKalman => "modkalman",
            EstimatorKind::Predictor => "predictor",
            EstimatorKind::Avg => "avg",
        }
    }

    /// Parses a comma-separated list, returning it sorted and deduplicated.
    pub fn parse_list(s: &str) -> Result<Vec<EstimatorKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            out.push(part.parse()?);
        }
        if out.is_empty() {
            return Err(Error::invalid("estimators", "empty estimator list"));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::invalid(
                    "estimators",
                    format!("unknown estimator `{s}` (expected ls, mmse, kalman, modkalman, predictor, avg)"),
                )
            })
    }
}

/// Stateful estimator instance driven one slot at a time.
#[derive(Debug, Clone)]
pub enum Estimator {
    Ls,
    Mmse { sigma_n2: f64, sigma_c2: f64 },
    Kalman { state: FilterState, a: f64, sigma_n2: f64, sigma_c2: f64 },
    ModKalman { state: FilterState, cfg: TrackerConfig },
    Predictor { state: FilterState, cfg: TrackerConfig },
    Avg(RunningAverage),
}

impl Estimator {
    /// `kalman_a` is the fixed coefficient for the conventional filter.
    pub fn new(kind: EstimatorKind, cfg: &TrackerConfig, kalman_a: f64) -> Self {
        match kind {
            EstimatorKind::Ls => Estimator::Ls,
            EstimatorKind::Mmse => Estimator::Mmse { sigma_n2: cfg.sigma_n2, sigma_c2: cfg.sigma_c2 },
            EstimatorKind::Kalman => Estimator::Kalman {
                state: FilterState::new(cfg.h_hat0, kalman_a, PRIOR_VARIANCE, cfg.q0, 0.0),
                a: kalman_a,
                sigma_n2: cfg.sigma_n2,
                sigma_c2: cfg.sigma_c2,
            },
            EstimatorKind::ModKalman => Estimator::ModKalman { state: FilterState::from_config(cfg), cfg: *cfg },
            EstimatorKind::Predictor => Estimator::Predictor { state: FilterState::from_config(cfg), cfg: *cfg },
            EstimatorKind::Avg => Estimator::Avg(RunningAverage::new()),
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            Estimator::Ls => EstimatorKind::Ls,
            Estimator::Mmse { .. } => EstimatorKind::Mmse,
            Estimator::Kalman { .. } => EstimatorKind::Kalman,
            Estimator::ModKalman { .. } => EstimatorKind::ModKalman,
            Estimator::Predictor { .. } => EstimatorKind::Predictor,
            Estimator::Avg(_) => EstimatorKind::Avg,
        }
    }

    /// Filter state, for the recursive estimators.
    pub fn state(&self) -> Option<&FilterState> {
        match self {
            Estimator::Kalman { state, .. }
            | Estimator::ModKalman { state, .. }
            | Estimator::Predictor { state, .. } => Some(state),
            _ => None,
        }
    }

    pub fn step(&mut self, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
        self.step_projected(Projection::new(x, y)?)
    }

    /// Advances one slot given the matched-filter statistic.
    pub fn step_projected(&mut self, proj: Projection) -> Result<Complex64> {
        match self {
            Estimator::Ls => linear::ls_projected(proj),
            Estimator::Mmse { sigma_n2, sigma_c2 } => linear::mmse_projected(proj, *sigma_n2, *sigma_c2),
            Estimator::Kalman { state, a, sigma_n2, sigma_c2 } => {
                kalman::kalman_projected(state, proj, *a, *sigma_n2, *sigma_c2)
            }
            Estimator::ModKalman { state, cfg } => {
                kalman::modified_projected(state, proj, cfg).map(|r| r.estimate)
            }
            Estimator::Predictor { state, cfg } => {
                kalman::modified_projected(state, proj, cfg).map(|r| r.prediction)
            }
            Estimator::Avg(avg) => avg.step_projected(proj),
        }
    }
}
