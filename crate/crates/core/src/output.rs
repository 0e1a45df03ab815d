//! CSV tables and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::harness::{GridCurve, SweepResult};

pub const SWEEP_HEADER: &str = "estimator,v_kmh,sir_db,mse,std_err,n_samples,seed";
pub const SURFACE_HEADER: &str = "v_kmh,a,mse,std_err";

/// Decimal rendering with nine significant digits.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-6..15).contains(&mag) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 * (result.rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.estimator,
            sig9(r.v_kmh),
            sig9(r.sir_db),
            sig9(r.mse),
            sig9(r.std_err),
            r.n_samples,
            r.seed
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_file(path, &sweep_csv(result))
}

pub fn surface_csv(curves: &[GridCurve]) -> String {
    let mut out = String::from(SURFACE_HEADER);
    out.push('\n');
    for c in curves {
        for ((a, m), s) in c.grid.iter().zip(&c.mse).zip(&c.std_err) {
            let _ = writeln!(out, "{},{},{},{}", sig9(c.v_kmh), sig9(*a), sig9(*m), sig9(*s));
        }
    }
    out
}

pub fn write_surface_csv(curves: &[GridCurve], path: &Path) -> Result<()> {
    write_file(path, &surface_csv(curves))
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub master_seed: u64,
    pub outputs: Vec<PathBuf>,
    pub config: SimConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: &SimConfig, outputs: Vec<PathBuf>) -> Self {
        Self {
            tool: "pilotsim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            master_seed: config.master_seed,
            outputs,
            config: config.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// `out.csv` -> `out.manifest.json`
pub fn manifest_path_for(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind;
    use crate::harness::SweepRow;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.8), "0.800000000");
        assert_eq!(sig9(130.0), "130.000000");
        assert_eq!(sig9(2.2184874961635637), "2.21848750");
        assert_eq!(sig9(-3.0), "-3.00000000");
        assert_eq!(sig9(0.0123456789012), "0.0123456789");
        assert_eq!(sig9(0.0), "0.00000000");
        assert_eq!(sig9(f64::INFINITY), "inf");
        assert_eq!(sig9(1e-9), "1.00000000e-9");
    }

    #[test]
    fn empty_result_is_header_only() {
        assert_eq!(sweep_csv(&SweepResult::default()), format!("{SWEEP_HEADER}\n"));
    }

    #[test]
    fn one_row_round_trips() {
        let row = SweepRow {
            estimator: EstimatorKind::ModKalman,
            v_kmh: 3.0,
            sir_db: 2.2184874961635637,
            mse: 0.0412345678912,
            std_err: 0.00123,
            n_samples: 950_000,
            seed: 42,
            diverged: 0,
        };
        let csv = sweep_csv(&SweepResult { rows: vec![row] });
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        let f: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(f[0], "modkalman");
        assert_eq!(f[0].parse::<EstimatorKind>().unwrap(), EstimatorKind::ModKalman);
        assert!((f[3].parse::<f64>().unwrap() - 0.0412345678912).abs() < 1e-10);
        assert_eq!(f[5].parse::<usize>().unwrap(), 950_000);
        assert_eq!(f[6], "42");
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = SimConfig { sir_db: Some(3.0), master_seed: 99, ..SimConfig::default() };
        let m = RunManifest::new("sweep-sir", &cfg, vec!["a.csv".into()]);
        let back = RunManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.config, cfg);
        assert_eq!(manifest_path_for(Path::new("out/x.csv")), Path::new("out/x.manifest.json"));
    }
}
