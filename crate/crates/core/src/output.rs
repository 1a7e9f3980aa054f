//! Output files of a simulation run.
//!
//! An output directory holds
//!
//! * `run_<i>.csv`: one metrics row per recorded timestep of run `i`,
//! * `ensemble_mean.csv`: the per-timestep mean over runs, same columns,
//! * `coefficients_<i>.csv`: fitted model coefficients of run `i` per timestep,
//! * `manifest.toml`: fingerprint, seeds, tool version, wall-clock time,
//! * `config.toml`: the configuration text exactly as given,
//! * `config.resolved.toml`: the same configuration with every default explicit.
//!
//! Numbers are printed with at most 9 significant digits; an absent value is
//! an empty cell. The ensemble mean is computed from the printed per-run
//! values, so averaging the `run_<i>.csv` columns reproduces
//! `ensemble_mean.csv` exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{average_rows, CoefficientSnapshot, RunOutput, SimulationConfig};
use crate::metrics::{MetricsRow, COLUMNS};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Rounds to 9 significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

/// Formats a value with at most 9 significant digits in plain decimal
/// notation. Printing is exact: the text parses back to `round_sig9(v)`.
pub fn fmt_sig9(v: f64) -> String {
    let r = round_sig9(v);
    if r == 0.0 {
        // Also folds -0.
        return "0".into();
    }
    format!("{r}")
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_sig9).unwrap_or_default()
}

/// CSV text for a sequence of metrics rows, header included.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{}", row.t);
        for v in row.values() {
            out.push(',');
            out.push_str(&cell(v));
        }
        out.push('\n');
    }
    out
}

/// Header of `coefficients_<i>.csv`. `coef_2` is empty for one-feature models.
pub const COEFFICIENT_COLUMNS: [&str; 5] = ["t", "variant", "coef_1", "coef_2", "intercept"];

pub fn coefficients_csv(snapshots: &[CoefficientSnapshot]) -> String {
    let mut out = COEFFICIENT_COLUMNS.join(",");
    out.push('\n');
    for snap in snapshots {
        let coefs = snap.model.coefficients();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            snap.t,
            snap.model.variant(),
            cell(coefs.first().copied()),
            cell(coefs.get(1).copied()),
            fmt_sig9(snap.model.intercept())
        );
    }
    out
}

/// Per-timestep mean over runs of the values as printed in `run_<i>.csv`.
pub fn printed_ensemble_mean(runs: &[RunOutput]) -> Vec<MetricsRow> {
    average_rows(runs, round_sig9)
}

/// Reproduction record written next to the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// SHA-256 of the resolved configuration.
    pub config_fingerprint: String,
    pub base_seed: u64,
    pub run_seeds: Vec<u64>,
    pub wall_clock_seconds: f64,
    /// Set when the ensemble stopped early; the CSV files are then missing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort: Option<String>,
}

impl RunManifest {
    pub fn new(config: &SimulationConfig, wall_clock_seconds: f64, abort: Option<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_fingerprint: config.fingerprint(),
            base_seed: config.base_seed,
            run_seeds: (0..config.n_runs).map(|i| config.run_seed(i)).collect(),
            wall_clock_seconds,
            abort,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes to TOML")
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<(), OutputError> {
    std::fs::write(&path, contents).map_err(|source| OutputError::Io { path, source })
}

/// Creates `dir` if needed and writes the configuration copies and manifest.
pub fn write_metadata(
    dir: &Path,
    config: &SimulationConfig,
    source_text: &str,
    manifest: &RunManifest,
) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(dir.join("config.toml"), source_text)?;
    write_file(dir.join("config.resolved.toml"), &config.to_toml())?;
    write_file(dir.join("manifest.toml"), &manifest.to_toml())
}

/// Writes every output file of a finished ensemble into `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &SimulationConfig,
    source_text: &str,
    runs: &[RunOutput],
    manifest: &RunManifest,
) -> Result<(), OutputError> {
    write_metadata(dir, config, source_text, manifest)?;
    for (i, run) in runs.iter().enumerate() {
        write_file(dir.join(format!("run_{i}.csv")), &metrics_csv(&run.rows))?;
        write_file(
            dir.join(format!("coefficients_{i}.csv")),
            &coefficients_csv(&run.coefficients),
        )?;
    }
    write_file(
        dir.join("ensemble_mean.csv"),
        &metrics_csv(&printed_ensemble_mean(runs)),
    )
}

/// Parses a metrics CSV written by [`metrics_csv`].
pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricsRow>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    if header != COLUMNS.join(",") {
        return Err(format!("unexpected header: {header}"));
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != COLUMNS.len() {
                return Err(format!("line {}: {} fields", n + 2, fields.len()));
            }
            let t = fields[0].parse().map_err(|e| format!("line {}: t: {e}", n + 2))?;
            let mut values = [None; 16];
            for (slot, field) in values.iter_mut().zip(&fields[1..]) {
                if !field.is_empty() {
                    *slot = Some(field.parse().map_err(|e| format!("line {}: {field}: {e}", n + 2))?);
                }
            }
            Ok(MetricsRow::from_values(t, values))
        })
        .collect()
}
