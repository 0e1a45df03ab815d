use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pilotsim::estimators::EstimatorKind;
use pilotsim::harness::{mse_surface, run_sweep, tracked_coefficients, unit_grid};
use pilotsim::output::{manifest_path_for, sig9, surface_csv, sweep_csv, RunManifest};
use pilotsim::pilots::{collision_pmf, expected_collision_distance, simulate_collision_distances};
use pilotsim::plot::{render_plot, render_surface, PlotAxis};
use pilotsim::scenario::ContaminationMode;
use pilotsim::seed::{stream_rng, Stream};
use pilotsim::{Execution, Point, SimConfig, SweepAxis, SweepResult};

/// Monte Carlo simulator for pilot-hopping channel estimation with an
/// AR-coefficient tracking Kalman filter.
#[derive(Parser, Debug)]
#[command(name = "pilotsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// MSE of each estimator against user speed.
    SweepMobility {
        #[command(flatten)]
        common: Common,
        /// Speeds in km/h (comma separated); defaults to the configured grid.
        #[arg(long, value_delimiter = ',')]
        v_kmh: Option<Vec<f64>>,
        #[command(flatten)]
        out: Outputs,
    },
    /// MSE of each estimator against signal-to-interference ratio.
    SweepSir {
        #[command(flatten)]
        common: Common,
        /// SIR points in dB (comma separated).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-3,0,3,6,10")]
        sir_points: Vec<f64>,
        /// Speed shared by all SIR points.
        #[arg(long, default_value_t = 3.0)]
        at_v_kmh: f64,
        #[command(flatten)]
        out: Outputs,
    },
    /// Conventional Kalman MSE over a grid of fixed AR coefficients.
    SurfaceA {
        #[command(flatten)]
        common: Common,
        /// Speeds in km/h (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "3,30,100")]
        v_kmh: Vec<f64>,
        /// Coefficient grid spacing on [0, 1].
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
        /// Also report the mean coefficient reached by the tracker.
        #[arg(long)]
        tracked: bool,
        #[command(flatten)]
        out: Outputs,
    },
    /// Empirical collision-distance histogram against the geometric law.
    CollisionStats {
        #[command(flatten)]
        common: Common,
        /// Pilots per cell; defaults to the configured K.
        #[arg(long)]
        k: Option<usize>,
        /// Slots to simulate.
        #[arg(long, default_value_t = 100_000)]
        slots: u64,
        /// Largest distance listed individually.
        #[arg(long)]
        max_d: Option<u64>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fast statistical sanity checks of the installed build.
    Selftest {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "PILOTSIM_SEED")]
    seed: Option<u64>,
    /// Worker threads (1 runs serially; default uses every core).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    mode: Option<ContaminationMode>,
    /// Estimators, e.g. `ls,mmse,modkalman`.
    #[arg(long)]
    estimators: Option<String>,
    /// Total contamination power.
    #[arg(long, conflicts_with = "sir_db")]
    sigma_c2: Option<f64>,
    /// Contamination as SIR in dB.
    #[arg(long, allow_hyphen_values = true)]
    sir_db: Option<f64>,
    #[arg(long)]
    sigma_n2: Option<f64>,
    #[arg(long)]
    n_slots: Option<usize>,
    #[arg(long)]
    n_realizations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// Disable pilot hopping.
    #[arg(long)]
    no_hopping: bool,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args, Debug)]
struct Outputs {
    /// CSV destination; stdout when omitted. A manifest is written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG chart destination.
    #[arg(long)]
    plot: Option<PathBuf>,
}

impl Common {
    fn init_logging(&self) {
        let level = match self.verbose {
            0 => "warn",
            1 => "info",
            _ => "debug",
        };
        let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    }

    fn resolve(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(path) => SimConfig::from_file(path)?,
            None => SimConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = &self.estimators {
            cfg.estimators = EstimatorKind::parse_list(v)?;
        }
        if let Some(v) = self.sigma_c2 {
            cfg.sigma_c2 = Some(v);
            cfg.sir_db = None;
        }
        if let Some(v) = self.sir_db {
            cfg.sir_db = Some(v);
            cfg.sigma_c2 = None;
        }
        if let Some(v) = self.sigma_n2 {
            cfg.sigma_n2 = v;
        }
        if let Some(v) = self.n_slots {
            cfg.n_slots = v;
        }
        if let Some(v) = self.n_realizations {
            cfg.n_realizations = v;
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.nu {
            cfg.nu = v;
        }
        if self.no_hopping {
            cfg.hopping = false;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn execution(&self) -> Execution {
        Execution::from_workers(self.workers)
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_manifest(command: &str, cfg: &SimConfig, out: &Outputs) -> Result<()> {
    if let Some(csv) = &out.out {
        let mut files = vec![csv.clone()];
        files.extend(out.plot.clone());
        RunManifest::new(command, cfg, files).write(&manifest_path_for(csv))?;
    }
    Ok(())
}

fn finish_sweep(command: &str, cfg: &SimConfig, result: &SweepResult, axis: PlotAxis, out: &Outputs) -> Result<ExitCode> {
    emit(&sweep_csv(result), out.out.as_deref())?;
    if let Some(svg) = &out.plot {
        render_plot(result, axis, svg)?;
    }
    write_manifest(command, cfg, out)?;
    let diverged = result.diverged();
    if diverged > 0 {
        eprintln!("warning: {diverged} estimator runs diverged and were excluded");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_mobility(common: &Common, v_kmh: &Option<Vec<f64>>, out: &Outputs) -> Result<ExitCode> {
    let mut cfg = common.resolve()?;
    if let Some(v) = v_kmh {
        cfg.v_kmh = v.clone();
    }
    let axis = SweepAxis::Mobility(cfg.v_kmh.clone());
    let result = run_sweep(&cfg, &axis, common.execution())?;
    finish_sweep("sweep-mobility", &cfg, &result, PlotAxis::Mobility, out)
}

fn sweep_sir(common: &Common, sir_points: &[f64], at_v_kmh: f64, out: &Outputs) -> Result<ExitCode> {
    let cfg = common.resolve()?;
    let axis = SweepAxis::Sir { sir_db: sir_points.to_vec(), v_kmh: at_v_kmh };
    let result = run_sweep(&cfg, &axis, common.execution())?;
    finish_sweep("sweep-sir", &cfg, &result, PlotAxis::Sir, out)
}

fn surface_a(common: &Common, v_kmh: &[f64], grid_step: f64, tracked: bool, out: &Outputs) -> Result<ExitCode> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        bail!("--grid-step must lie in (0, 1]");
    }
    let cfg = common.resolve()?;
    let exec = common.execution();
    let curves = mse_surface(&cfg, v_kmh, &unit_grid(grid_step), exec)?;
    for c in &curves {
        let i = c.grid.iter().position(|&a| a == c.a_star).unwrap_or(0);
        let mut line = format!("v = {} km/h: a* = {} (mse {})", c.v_kmh, c.a_star, sig9(c.mse[i]));
        if tracked {
            let point = Point { v_kmh: c.v_kmh, sigma_c2: cfg.resolved_sigma_c2() };
            let a = tracked_coefficients(&cfg, point, exec)?;
            let _ = write!(line, ", tracked a = {}", sig9(a.iter().sum::<f64>() / a.len() as f64));
        }
        eprintln!("{line}");
    }
    emit(&surface_csv(&curves), out.out.as_deref())?;
    if let Some(svg) = &out.plot {
        render_surface(&curves, svg)?;
    }
    write_manifest("surface-a", &cfg, out)?;
    Ok(ExitCode::SUCCESS)
}

fn collision_stats(common: &Common, k: Option<usize>, slots: u64, max_d: Option<u64>, out: Option<&Path>) -> Result<ExitCode> {
    let cfg = common.resolve()?;
    let k = k.unwrap_or(cfg.users);
    let max_d = max_d.unwrap_or(4 * k as u64).max(1);
    let mut rng = stream_rng(cfg.master_seed, Stream::Hop, &[u64::MAX]);
    let gaps = simulate_collision_distances(&mut rng, k, slots)?;
    if gaps.is_empty() {
        bail!("no collisions observed; simulate more slots");
    }
    let n = gaps.len() as f64;
    let mut counts = vec![0u64; max_d as usize + 1];
    for &d in &gaps {
        counts[d.min(max_d + 1) as usize - 1] += 1;
    }
    let mut csv = String::from("d,count,empirical,pmf\n");
    let mut head = 0.0;
    for d in 1..=max_d {
        let pmf = collision_pmf(d, k)?;
        head += pmf;
        let c = counts[d as usize - 1];
        let _ = writeln!(csv, "{d},{c},{},{}", sig9(c as f64 / n), sig9(pmf));
    }
    let tail = counts[max_d as usize];
    let _ = writeln!(csv, ">{max_d},{tail},{},{}", sig9(tail as f64 / n), sig9(1.0 - head));
    emit(&csv, out)?;
    let mean = gaps.iter().sum::<u64>() as f64 / n;
    eprintln!(
        "K = {k}: {} collision gaps over {slots} slots, mean {} (expected {})",
        gaps.len(),
        sig9(mean),
        expected_collision_distance(k)
    );
    Ok(ExitCode::SUCCESS)
}

fn selftest(common: &Common) -> Result<ExitCode> {
    let base = common.resolve()?;
    let exec = common.execution();
    let mut failures = 0;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failures += usize::from(!ok);
    };
    let start = Instant::now();

    let mut rng = stream_rng(base.master_seed, Stream::Hop, &[u64::MAX]);
    let gaps = simulate_collision_distances(&mut rng, 96, 100_000)?;
    let mean = gaps.iter().sum::<u64>() as f64 / gaps.len() as f64;
    check("collision distance", (mean / 96.0 - 1.0).abs() <= 0.02, format!("mean {mean:.2}, expected 96"));

    let cfg = SimConfig {
        n_realizations: 200,
        n_slots: 100,
        burn_in: 0,
        sigma_c2: Some(0.6),
        sir_db: None,
        sigma_n2: 0.2,
        mode: ContaminationMode::Idealized,
        estimators: vec![EstimatorKind::Ls, EstimatorKind::Mmse],
        ..base.clone()
    };
    let r = run_sweep(&cfg, &SweepAxis::Mobility(vec![30.0]), exec)?;
    check("LS oracle", (r.rows[0].mse - 0.8).abs() <= 0.02, format!("mse {:.4}, expected 0.8", r.rows[0].mse));
    let target = 0.8 / 1.8;
    check("MMSE oracle", (r.rows[1].mse - target).abs() <= 0.02, format!("mse {:.4}, expected {target:.4}", r.rows[1].mse));

    let cfg = SimConfig {
        n_realizations: 20,
        n_slots: 5000,
        sigma_c2: Some(0.6),
        sir_db: None,
        estimators: vec![EstimatorKind::Ls, EstimatorKind::ModKalman],
        ..base
    };
    let r = run_sweep(&cfg, &SweepAxis::Mobility(vec![3.0]), exec)?;
    let ratio = r.rows[1].mse / r.rows[0].mse;
    check("low-mobility tracking", ratio <= 0.15, format!("modkalman/LS {ratio:.3} at 3 km/h"));

    println!("selftest finished in {:.2?}", start.elapsed());
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::SweepMobility { common, v_kmh, out } => {
            common.init_logging();
            sweep_mobility(common, v_kmh, out)
        }
        Command::SweepSir { common, sir_points, at_v_kmh, out } => {
            common.init_logging();
            sweep_sir(common, sir_points, *at_v_kmh, out)
        }
        Command::SurfaceA { common, v_kmh, grid_step, tracked, out } => {
            common.init_logging();
            surface_a(common, v_kmh, *grid_step, *tracked, out)
        }
        Command::CollisionStats { common, k, slots, max_d, out } => {
            common.init_logging();
            collision_stats(common, *k, *slots, *max_d, out.as_deref())
        }
        Command::Selftest { common } => {
            common.init_logging();
            selftest(common)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
