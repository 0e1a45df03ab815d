//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::fd::check_trajectory;
use common::{gaussian_vec, max_abs_diff, naive_gain, naive_mmse};
use pilotsim::channel::{theoretical_autocorrelation, ClarkeChannel, DopplerParams};
use pilotsim::estimators::{kalman_gain, mmse_estimate, CovarianceDerivative, EstimatorKind, RunningAverage};
use pilotsim::harness::{grid_optimal_a, run_sweep, tracked_coefficients, unit_grid};
use pilotsim::output::sweep_csv;
use pilotsim::pilots::{make_pilot_book, simulate_collision_distances};
use pilotsim::scenario::{CellTopology, ContaminationMode, ScenarioParams, SlotStream};
use pilotsim::seed::{stream_rng, Stream};
use pilotsim::{Execution, Point, SimConfig, SweepAxis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_within(value: f64, target: f64, tol: f64) -> bool {
    ((value - target) / target).abs() <= tol
}

fn collision_distance() -> Outcome {
    let mut rng = stream_rng(1, Stream::Hop, &[u64::MAX]);
    let d = simulate_collision_distances(&mut rng, 96, 100_000).map_err(|e| e.to_string())?;
    let mean = d.iter().sum::<u64>() as f64 / d.len() as f64;
    verdict(
        rel_within(mean, 96.0, 0.02),
        format!("mean t_c {mean:.2} over {} gaps (target 96 +/- 2%)", d.len()),
    )
}

fn constant_channel_averaging() -> Outcome {
    let params = ScenarioParams {
        topology: CellTopology {
            cells: 7,
            users: 96,
            mode: ContaminationMode::Idealized,
            sigma_c2: 0.6,
            sigma_n2: 0.0,
        },
        tau: 96,
        n_scatterers: 20,
        f_d: 0.0,
        t_s: 0.5e-3,
        hopping: true,
    };
    let book = make_pilot_book(96, 96).unwrap();
    let n = 50;
    let reps = 1000;
    let mut total = 0.0;
    for r in 0..reps {
        let mut stream = SlotStream::new(&params, &book, 11, r).map_err(|e| e.to_string())?;
        let mut obs = stream.empty_observation();
        let mut avg = RunningAverage::new();
        let mut est = Default::default();
        for _ in 0..n {
            stream.next_into(&mut obs).map_err(|e| e.to_string())?;
            est = avg.step(book.pilot(obs.pilot), &obs.y).map_err(|e| e.to_string())?;
        }
        total += (est - obs.h_true).norm_sqr();
    }
    let var = total / reps as f64;
    verdict(
        rel_within(var, 0.6 / n as f64, 0.2),
        format!("error variance {var:.5} after {n} slots (target 0.012 +/- 20%)"),
    )
}

fn linear_oracles() -> (Outcome, Outcome) {
    let cfg = SimConfig {
        // MMSE error scales with |h|^2, so many short independent channels.
        n_realizations: 200,
        n_slots: 100,
        burn_in: 0,
        estimators: vec![EstimatorKind::Ls, EstimatorKind::Mmse],
        ..SimConfig::default()
    };
    let res = match run_sweep(&cfg, &SweepAxis::Mobility(vec![3.0, 100.0]), Execution::Parallel) {
        Ok(r) => r,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let check = |kind: EstimatorKind, target: f64| {
        let rows: Vec<_> = res.series(kind).collect();
        let ok = rows.iter().all(|r| (r.mse - target).abs() <= 0.02);
        let text = rows
            .iter()
            .map(|r| format!("{:.4}@{}km/h", r.mse, r.v_kmh))
            .collect::<Vec<_>>()
            .join(", ");
        verdict(ok, format!("MSE {text} (target {target:.4} +/- 0.02, {} samples each)", rows[0].n_samples))
    };
    (check(EstimatorKind::Ls, 0.8), check(EstimatorKind::Mmse, 0.8 / 1.8))
}

fn derivative_recursions() -> Outcome {
    let worst = (0..20)
        .map(|seed| check_trajectory(seed, 200, CovarianceDerivative::Exact))
        .fold(common::fd::Worst::default(), |a, b| common::fd::Worst {
            q: a.q.max(b.q),
            m: a.m.max(b.m),
            s: a.s.max(b.s),
            grad: a.grad.max(b.grad),
        });
    verdict(
        worst.max() < 1e-4,
        format!(
            "max rel err q {:.1e}, m {:.1e}, s {:.1e}, grad {:.1e} (limit 1e-4)",
            worst.q, worst.m, worst.s, worst.grad
        ),
    )
}

fn rank_one_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for &tau in &[4usize, 96] {
        for _ in 0..100 {
            let x = gaussian_vec(&mut rng, tau);
            let y = gaussian_vec(&mut rng, tau);
            let p = rng.random_range(0.0..2.0);
            let sn2 = rng.random_range(0.01..1.0);
            let sc2 = rng.random_range(0.0..1.0);
            worst = worst.max(max_abs_diff(&kalman_gain(&x, p, sn2, sc2), &naive_gain(&x, p, sn2, sc2)));
            let fast = mmse_estimate(&x, &y, sn2, sc2).map_err(|e| e.to_string())?;
            worst = worst.max((fast - naive_mmse(&x, &y, sn2, sc2)).norm());
        }
    }
    verdict(worst < 1e-10, format!("max deviation from dense solve {worst:.1e} (limit 1e-10)"))
}

fn clarke_statistics() -> Outcome {
    let channels = 10_000;
    let origins = 40;
    let spacing = 50.0;
    let max_lag = 20;
    let t_s = 0.5e-3;
    let mut worst_power: f64 = 0.0;
    let mut worst_corr: f64 = 0.0;
    for (vi, &v) in [3.0, 30.0, 100.0].iter().enumerate() {
        let f_d = DopplerParams::from_kmh(v, 1.8e9).map_err(|e| e.to_string())?.f_d;
        let mut acc = vec![0.0; max_lag + 1];
        for i in 0..channels {
            let mut rng = stream_rng(7, Stream::UserChannel, &[vi as u64, i]);
            let ch = ClarkeChannel::new(&mut rng, 20, f_d).map_err(|e| e.to_string())?;
            for o in 0..origins {
                let t0 = o as f64 * spacing * t_s;
                let h0 = ch.sample(t0);
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += (ch.sample(t0 + k as f64 * t_s) * h0.conj()).re;
                }
            }
        }
        let norm = (channels * origins as u64) as f64;
        worst_power = worst_power.max((acc[0] / norm - 1.0).abs());
        for (k, a) in acc.iter().enumerate() {
            let theory = theoretical_autocorrelation(f_d, k as f64 * t_s);
            worst_corr = worst_corr.max((a / norm - theory).abs());
        }
    }
    verdict(
        worst_power <= 0.02 && worst_corr <= 0.02,
        format!("max |E|h|^2 - 1| {worst_power:.4}, max |R(k) - J0| {worst_corr:.4} (limit 0.02)"),
    )
}

fn low_mobility_gain() -> Outcome {
    let cfg = SimConfig {
        n_realizations: 100,
        n_slots: 10_000,
        burn_in: 500,
        estimators: vec![EstimatorKind::Ls, EstimatorKind::ModKalman],
        ..SimConfig::default()
    };
    let res = run_sweep(&cfg, &SweepAxis::Mobility(vec![1.0, 3.0]), Execution::Parallel).map_err(|e| e.to_string())?;
    let mut ok = res.diverged() == 0;
    let mut parts = vec![];
    for v in [1.0, 3.0] {
        let sir = res.rows[0].sir_db;
        let ls = res.row(EstimatorKind::Ls, v, sir).unwrap().mse;
        let mk = res.row(EstimatorKind::ModKalman, v, sir).unwrap().mse;
        ok &= mk <= 0.15 * ls;
        parts.push(format!("{v} km/h: {mk:.4}/{ls:.4} = {:.3}", mk / ls));
    }
    verdict(ok, format!("modkalman/LS {} (limit 0.15)", parts.join(", ")))
}

fn tracker_convergence() -> Outcome {
    let cfg = SimConfig { n_realizations: 20, n_slots: 5000, ..SimConfig::default() };
    let grid = unit_grid(0.01);
    let mut ok = true;
    let mut parts = vec![];
    for v in [3.0, 30.0, 100.0] {
        let curve = grid_optimal_a(&cfg, v, &grid, Execution::Parallel).map_err(|e| e.to_string())?;
        let point = Point { v_kmh: v, sigma_c2: cfg.resolved_sigma_c2() };
        let a = tracked_coefficients(&cfg, point, Execution::Parallel).map_err(|e| e.to_string())?;
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        ok &= (mean - curve.a_star).abs() <= 0.05;
        parts.push(format!("{v} km/h: tracked {mean:.3} vs a* {:.2}", curve.a_star));
    }
    verdict(ok, format!("{} (limit 0.05)", parts.join(", ")))
}

fn high_mobility_parity() -> Outcome {
    let cfg = SimConfig {
        n_realizations: 50,
        n_slots: 10_000,
        estimators: vec![EstimatorKind::Mmse, EstimatorKind::ModKalman],
        ..SimConfig::default()
    };
    let res = run_sweep(&cfg, &SweepAxis::Mobility(vec![130.0]), Execution::Parallel).map_err(|e| e.to_string())?;
    let mmse = res.rows[0].mse;
    let mk = res.rows[1].mse;
    verdict(
        res.diverged() == 0 && mk <= 1.1 * mmse,
        format!("130 km/h: modkalman {mk:.4} vs MMSE {mmse:.4}, ratio {:.3} (limit 1.1)", mk / mmse),
    )
}

fn no_hopping_control() -> Outcome {
    let cfg = SimConfig {
        mode: ContaminationMode::Explicit,
        hopping: false,
        n_realizations: 400,
        n_slots: 2000,
        burn_in: 500,
        estimators: vec![EstimatorKind::ModKalman],
        ..SimConfig::default()
    };
    let res = run_sweep(&cfg, &SweepAxis::Mobility(vec![0.0]), Execution::Parallel).map_err(|e| e.to_string())?;
    let mse = res.rows[0].mse;
    let floor = 0.8 * cfg.resolved_sigma_c2();
    verdict(
        mse >= floor,
        format!("static channels, no hopping: modkalman MSE {mse:.4} (floor {floor:.2})"),
    )
}

fn determinism() -> Outcome {
    let cfg = SimConfig {
        n_realizations: 6,
        n_slots: 1500,
        burn_in: 100,
        estimators: EstimatorKind::ALL.to_vec(),
        master_seed: 2024,
        ..SimConfig::default()
    };
    let axis = SweepAxis::Mobility(vec![3.0, 50.0]);
    let a = sweep_csv(&run_sweep(&cfg, &axis, Execution::Parallel).map_err(|e| e.to_string())?);
    let b = sweep_csv(&run_sweep(&cfg, &axis, Execution::Parallel).map_err(|e| e.to_string())?);
    let c = sweep_csv(&run_sweep(&cfg, &axis, Execution::Serial).map_err(|e| e.to_string())?);
    verdict(
        a == b && a == c,
        format!("{} bytes; repeat identical: {}, serial identical: {}", a.len(), a == b, a == c),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome, Duration)> = vec![];
    let mut record = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let out = f();
        results.push((id, name, out, t.elapsed()));
    };
    record(1, "collision distance", &collision_distance);
    record(2, "constant-channel averaging", &constant_channel_averaging);
    let t = Instant::now();
    let (ls, mmse) = linear_oracles();
    let half = t.elapsed() / 2;
    results.push((3, "LS oracle", ls, half));
    results.push((4, "MMSE oracle", mmse, half));
    let mut record = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let out = f();
        results.push((id, name, out, t.elapsed()));
    };
    record(5, "derivative recursions", &derivative_recursions);
    record(6, "rank-one algebra", &rank_one_algebra);
    record(7, "Clarke statistics", &clarke_statistics);
    record(8, "low-mobility decontamination", &low_mobility_gain);
    record(9, "tracker convergence", &tracker_convergence);
    record(10, "high-mobility parity", &high_mobility_parity);
    record(11, "no-hopping control", &no_hopping_control);
    record(12, "determinism", &determinism);

    let mut failed = 0;
    for (id, name, out, took) in &results {
        let (tag, detail) = match out {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {id:>2} {name}: {detail} ({:.2?})", took);
    }
    println!("acceptance: {} passed, {failed} failed in {:.2?}", results.len() - failed, start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
