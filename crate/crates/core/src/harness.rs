//! Monte Carlo orchestration: realizations, burn-in, MSE aggregation, sweeps
//! over mobility and SIR, and the fixed-coefficient grid oracle.
//!
//! Realizations are independent work units keyed by `(master_seed, index)`.
//! With the `parallel` feature they are distributed over a rayon pool;
//! results are always reduced in realization order, so serial and parallel
//! runs produce bit-identical aggregates.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{kmh_to_ms, doppler_shift, theoretical_autocorrelation};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::estimators::{Estimator, EstimatorKind, FilterState, Projection, PRIOR_VARIANCE};
use crate::pilots::{make_pilot_book, PilotBook};
use crate::scenario::{sigma_c_to_sir, sir_to_sigma_c, CellTopology, ScenarioParams, SlotStream};

/// How realizations are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Rayon pool with `workers` threads (machine parallelism when `None`).
    /// Falls back to serial without the `parallel` feature.
    #[default]
    Parallel,
    Workers(usize),
}

impl Execution {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            None => Execution::Parallel,
            Some(0) | Some(1) => Execution::Serial,
            Some(n) => Execution::Workers(n),
        }
    }
}

/// Maps `f` over `0..n` under the requested execution, preserving order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Serial => Ok((0..n).map(f).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            Ok((0..n).into_par_iter().map(f).collect())
        }
        #[cfg(feature = "parallel")]
        Execution::Workers(w) => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::invalid("workers", e.to_string()))?;
            Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::Workers(_) => Ok((0..n).map(f).collect()),
    }
}

/// One operating point: mobility and contamination power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub v_kmh: f64,
    pub sigma_c2: f64,
}

impl Point {
    pub fn sir_db(&self) -> f64 {
        sigma_c_to_sir(self.sigma_c2)
    }
}

/// Everything derived from a config that is shared by all realizations at one point.
struct Prepared<'a> {
    cfg: &'a SimConfig,
    book: PilotBook,
    params: ScenarioParams,
    kalman_a: f64,
    point: Point,
}

impl<'a> Prepared<'a> {
    fn new(cfg: &'a SimConfig, point: Point) -> Result<Self> {
        cfg.validate()?;
        let f_d = doppler_shift(kmh_to_ms(point.v_kmh), cfg.f_c)?;
        let params = ScenarioParams {
            topology: CellTopology {
                cells: cfg.cells,
                users: cfg.users,
                mode: cfg.mode,
                sigma_c2: point.sigma_c2,
                sigma_n2: cfg.sigma_n2,
            },
            tau: cfg.tau,
            n_scatterers: cfg.n_scatterers,
            f_d,
            t_s: cfg.t_s,
            hopping: cfg.hopping,
        };
        params.topology.validate()?;
        cfg.tracker(point.sigma_c2).validate()?;
        let kalman_a = cfg
            .kalman_a
            .unwrap_or_else(|| theoretical_autocorrelation(f_d, cfg.t_s).clamp(0.0, 1.0));
        Ok(Self {
            cfg,
            book: make_pilot_book(cfg.tau, cfg.users)?,
            params,
            kalman_a,
            point,
        })
    }

    fn estimators(&self) -> Vec<Estimator> {
        let tracker = self.cfg.tracker(self.point.sigma_c2);
        self.cfg
            .estimators
            .iter()
            .map(|&k| Estimator::new(k, &tracker, self.kalman_a))
            .collect()
    }

    /// Runs one realization, handing `(estimator slot, slot index, squared error)` to `sink`.
    fn drive(
        &self,
        realization: u64,
        mut sink: impl FnMut(usize, usize, f64),
    ) -> Result<Vec<EstimatorRun>> {
        let mut stream = SlotStream::new(&self.params, &self.book, self.cfg.master_seed, realization)?;
        let mut obs = stream.empty_observation();
        let mut estimators = self.estimators();
        let mut failures: Vec<Option<Error>> = vec![None; estimators.len()];
        for n in 0..self.cfg.n_slots {
            stream.next_into(&mut obs)?;
            let proj = Projection::new(self.book.pilot(obs.pilot), &obs.y)?;
            for (i, est) in estimators.iter_mut().enumerate() {
                if failures[i].is_some() {
                    continue;
                }
                match est.step_projected(proj) {
                    Ok(h_hat) => sink(i, n, (h_hat - obs.h_true).norm_sqr()),
                    Err(e @ (Error::Divergence { .. } | Error::NonFinite { .. })) => {
                        log::warn!(
                            "{} diverged in realization {realization} at v={} km/h: {e}",
                            est.kind(),
                            self.point.v_kmh
                        );
                        failures[i] = Some(e);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(estimators
            .into_iter()
            .zip(failures)
            .map(|(est, failure)| EstimatorRun {
                kind: est.kind(),
                final_state: est.state().copied(),
                failure,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorRun {
    pub kind: EstimatorKind,
    pub final_state: Option<FilterState>,
    /// Set when the estimator diverged; its error sequence is then truncated.
    pub failure: Option<Error>,
}

/// Squared errors of every configured estimator over one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationErrors {
    pub realization: u64,
    pub runs: Vec<EstimatorRun>,
    /// `errors[i][n] = |h_hat_n - h_n|^2` for estimator `runs[i]`.
    pub errors: Vec<Vec<f64>>,
}

impl RealizationErrors {
    pub fn of(&self, kind: EstimatorKind) -> Option<&[f64]> {
        self.runs
            .iter()
            .position(|r| r.kind == kind)
            .map(|i| self.errors[i].as_slice())
    }

    pub fn run(&self, kind: EstimatorKind) -> Option<&EstimatorRun> {
        self.runs.iter().find(|r| r.kind == kind)
    }
}

/// Simulates one realization at `point` and returns per-slot squared errors.
pub fn run_realization(cfg: &SimConfig, point: Point, realization: u64) -> Result<RealizationErrors> {
    let prep = Prepared::new(cfg, point)?;
    let mut errors = vec![Vec::with_capacity(cfg.n_slots); cfg.estimators.len()];
    let runs = prep.drive(realization, |i, _, e| errors[i].push(e))?;
    Ok(RealizationErrors { realization, runs, errors })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseStats {
    pub mse: f64,
    /// Standard error of the mean across realization means.
    pub std_err: f64,
    pub n_samples: usize,
}

fn mean_and_stderr(means: &[f64]) -> (f64, f64) {
    let r = means.len() as f64;
    let mean = means.iter().sum::<f64>() / r;
    if means.len() < 2 {
        return (mean, 0.0);
    }
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Mean squared error over slots `burn_in..`, averaged across realizations.
pub fn compute_mse(errors: &[Vec<f64>], burn_in: usize) -> Result<MseStats> {
    if errors.is_empty() {
        return Err(Error::EmptyWindow("no realizations".into()));
    }
    let mut means = Vec::with_capacity(errors.len());
    let mut n_samples = 0;
    for (r, seq) in errors.iter().enumerate() {
        let window = seq.get(burn_in..).filter(|w| !w.is_empty()).ok_or_else(|| {
            Error::EmptyWindow(format!(
                "realization {r} has {} slots, burn-in is {burn_in}",
                seq.len()
            ))
        })?;
        n_samples += window.len();
        means.push(window.iter().sum::<f64>() / window.len() as f64);
    }
    let (mse, std_err) = mean_and_stderr(&means);
    Ok(MseStats { mse, std_err, n_samples })
}

/// Sweep axis.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Mobility points in km/h at the configured contamination power.
    Mobility(Vec<f64>),
    /// SIR points in dB at a fixed mobility.
    Sir { sir_db: Vec<f64>, v_kmh: f64 },
}

impl SweepAxis {
    pub fn points(&self, cfg: &SimConfig) -> Vec<Point> {
        match self {
            SweepAxis::Mobility(vs) => {
                let sigma_c2 = cfg.resolved_sigma_c2();
                vs.iter().map(|&v_kmh| Point { v_kmh, sigma_c2 }).collect()
            }
            SweepAxis::Sir { sir_db, v_kmh } => sir_db
                .iter()
                .map(|&db| Point { v_kmh: *v_kmh, sigma_c2: sir_to_sigma_c(db) })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SweepAxis::Mobility(v) => v.is_empty(),
            SweepAxis::Sir { sir_db, .. } => sir_db.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub estimator: EstimatorKind,
    pub v_kmh: f64,
    pub sir_db: f64,
    pub mse: f64,
    pub std_err: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Realizations excluded after divergence.
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn diverged(&self) -> usize {
        self.rows.iter().map(|r| r.diverged).sum()
    }

    pub fn row(&self, estimator: EstimatorKind, v_kmh: f64, sir_db: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            r.estimator == estimator && r.v_kmh == v_kmh && (r.sir_db == sir_db || (r.sir_db.is_nan() && sir_db.is_nan()))
        })
    }

    pub fn series(&self, estimator: EstimatorKind) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.estimator == estimator)
    }
}

/// Post-burn-in mean squared error of each estimator for one realization;
/// `None` where the estimator diverged.
fn realization_means(prep: &Prepared<'_>, realization: u64) -> Result<Vec<Option<f64>>> {
    let burn_in = prep.cfg.burn_in;
    let mut sums = vec![0.0; prep.cfg.estimators.len()];
    let runs = prep.drive(realization, |i, n, e| {
        if n >= burn_in {
            sums[i] += e;
        }
    })?;
    let window = (prep.cfg.n_slots - burn_in) as f64;
    Ok(runs
        .iter()
        .zip(sums)
        .map(|(run, s)| run.failure.is_none().then_some(s / window))
        .collect())
}

/// Runs `n_realizations` at every axis point and aggregates one row per
/// `(estimator, point)`, estimator-major in configured order.
pub fn run_sweep(cfg: &SimConfig, axis: &SweepAxis, exec: Execution) -> Result<SweepResult> {
    if axis.is_empty() {
        return Err(Error::invalid("axis", "no sweep points"));
    }
    let start = Instant::now();
    let points = axis.points(cfg);
    let prepared = points
        .iter()
        .map(|&p| Prepared::new(cfg, p))
        .collect::<Result<Vec<_>>>()?;
    let reps = cfg.n_realizations;
    let jobs = prepared.len() * reps;
    let per_job = map_indexed(jobs, exec, |j| realization_means(&prepared[j / reps], (j % reps) as u64))?;

    let window = cfg.n_slots - cfg.burn_in;
    let mut rows = Vec::with_capacity(cfg.estimators.len() * points.len());
    for (ei, &estimator) in cfg.estimators.iter().enumerate() {
        for (pi, point) in points.iter().enumerate() {
            let mut means = Vec::with_capacity(reps);
            let mut diverged = 0;
            for r in 0..reps {
                match &per_job[pi * reps + r] {
                    Ok(m) => match m[ei] {
                        Some(v) => means.push(v),
                        None => diverged += 1,
                    },
                    Err(e) => return Err(e.clone()),
                }
            }
            let (mse, std_err) = if means.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_and_stderr(&means)
            };
            rows.push(SweepRow {
                estimator,
                v_kmh: point.v_kmh,
                sir_db: point.sir_db(),
                mse,
                std_err,
                n_samples: means.len() * window,
                seed: cfg.master_seed,
                diverged,
            });
        }
    }
    log::info!(
        "sweep: {} points x {} realizations x {} slots in {:.2?}",
        points.len(),
        reps,
        cfg.n_slots,
        start.elapsed()
    );
    Ok(SweepResult { rows })
}

/// MSE of the conventional Kalman filter as a function of its fixed AR coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCurve {
    pub v_kmh: f64,
    pub grid: Vec<f64>,
    pub mse: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Grid coefficient with the smallest MSE.
    pub a_star: f64,
}

/// Evaluates the conventional Kalman filter for every coefficient in `grid`
/// on common observation streams and returns the MSE curve and its argmin.
pub fn grid_optimal_a(cfg: &SimConfig, v_kmh: f64, grid: &[f64], exec: Execution) -> Result<GridCurve> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty coefficient grid"));
    }
    if let Some(a) = grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::invalid("grid", format!("coefficient {a} outside [0, 1]")));
    }
    let point = Point { v_kmh, sigma_c2: cfg.resolved_sigma_c2() };
    let prep = Prepared::new(cfg, point)?;
    let burn_in = cfg.burn_in;
    let window = (cfg.n_slots - burn_in) as f64;
    let per_real = map_indexed(cfg.n_realizations, exec, |r| -> Result<Vec<f64>> {
        let mut stream = SlotStream::new(&prep.params, &prep.book, cfg.master_seed, r as u64)?;
        let mut obs = stream.empty_observation();
        let zero = Complex64::new(0.0, 0.0);
        let mut filters: Vec<Estimator> = grid
            .iter()
            .map(|&a| Estimator::Kalman {
                state: FilterState::new(zero, a, PRIOR_VARIANCE, zero, 0.0),
                a,
                sigma_n2: cfg.sigma_n2,
                sigma_c2: point.sigma_c2,
            })
            .collect();
        let mut sums = vec![0.0; grid.len()];
        for n in 0..cfg.n_slots {
            stream.next_into(&mut obs)?;
            let proj = Projection::new(prep.book.pilot(obs.pilot), &obs.y)?;
            for (f, sum) in filters.iter_mut().zip(sums.iter_mut()) {
                let h_hat = f.step_projected(proj)?;
                if n >= burn_in {
                    *sum += (h_hat - obs.h_true).norm_sqr();
                }
            }
        }
        Ok(sums.into_iter().map(|s| s / window).collect())
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut mse = Vec::with_capacity(grid.len());
    let mut std_err = Vec::with_capacity(grid.len());
    for g in 0..grid.len() {
        let means: Vec<f64> = per_real.iter().map(|m| m[g]).collect();
        let (m, s) = mean_and_stderr(&means);
        mse.push(m);
        std_err.push(s);
    }
    let best = mse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(GridCurve { v_kmh, grid: grid.to_vec(), mse, std_err, a_star: grid[best] })
}

/// Uniform grid `0, step, 2 step, ..., 1`.
pub fn unit_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Grid curves for several mobilities (the MSE surface over coefficient and mobility).
pub fn mse_surface(cfg: &SimConfig, v_kmh: &[f64], grid: &[f64], exec: Execution) -> Result<Vec<GridCurve>> {
    v_kmh.iter().map(|&v| grid_optimal_a(cfg, v, grid, exec)).collect()
}

/// Final tracked AR coefficient of the modified Kalman filter in each realization.
pub fn tracked_coefficients(cfg: &SimConfig, point: Point, exec: Execution) -> Result<Vec<f64>> {
    let mut cfg = cfg.clone();
    cfg.estimators = vec![EstimatorKind::ModKalman];
    let prep = Prepared::new(&cfg, point)?;
    map_indexed(cfg.n_realizations, exec, |r| {
        let runs = prep.drive(r as u64, |_, _, _| {})?;
        let run = &runs[0];
        match (&run.failure, run.final_state) {
            (Some(e), _) => Err(e.clone()),
            (None, Some(s)) => Ok(s.a),
            (None, None) => unreachable!("tracker always carries state"),
        }
    })?
    .into_iter()
    .collect()
}
