//! Summary tables rebuilt from the CSV artifacts of finished runs.
//!
//! Accuracy, convergence and timing come from the per-round CSVs; the final
//! detection verdict is not a per-round quantity, so it is read from the
//! run's summary document when present.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use flare_core::metrics;
use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{self, OutputError, Stat};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0} contains no run directories")]
    Empty(PathBuf),
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    pub aggregator: String,
    pub attack: String,
    pub malicious_fraction: f64,
    pub repetitions: usize,
    pub final_accuracy_mean: f64,
    pub final_accuracy_std: f64,
    pub convergence_round_mean: f64,
    pub f1_mean: Option<f64>,
    pub f1_std: Option<f64>,
    pub untrusted_mean: Option<f64>,
    pub server_us_per_round: f64,
}

fn is_run_dir(dir: &Path) -> bool {
    dir.join(output::CONFIG_FILE).is_file() && dir.join(output::rounds_file(0)).is_file()
}

/// Run directories at `root` itself or one level below it, sorted by path.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if is_run_dir(root) {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = std::fs::read_dir(root).map_err(|source| OutputError::Io { path: root.to_path_buf(), source })?;
    let mut runs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| is_run_dir(p)).collect();
    runs.sort();
    if runs.is_empty() {
        return Err(ReportError::Empty(root.to_path_buf()));
    }
    Ok(runs)
}

/// Builds the table row of one run directory.
pub fn summarize_run(dir: &Path) -> Result<ReportRow, ReportError> {
    let cfg = ExperimentConfig::from_file(&dir.join(output::CONFIG_FILE))?;
    let mut accuracy = Vec::new();
    let mut convergence = Vec::new();
    let mut per_round = Vec::new();
    let mut rep = 0;
    while dir.join(output::rounds_file(rep)).is_file() {
        let rows = output::read_rounds(&dir.join(output::rounds_file(rep)))?;
        let acc: Vec<f64> = rows.iter().map(|r| r.test_accuracy).collect();
        accuracy.push(metrics::final_mean(&acc));
        convergence.push(metrics::convergence_round(&acc).map_or(f64::NAN, |r| r as f64));
        let timing_path = dir.join(output::timing_file(rep));
        if timing_path.is_file() {
            let timing = output::read_timing(&timing_path)?;
            let total: f64 = timing.iter().map(|t| t.server_seconds).sum();
            per_round.push(total / timing.len().max(1) as f64);
        }
        rep += 1;
    }
    let summary_path = dir.join(output::SUMMARY_FILE);
    let summary = if summary_path.is_file() { Some(output::read_summary(&summary_path)?) } else { None };
    let f1 = summary.as_ref().and_then(|s| s.metrics.f1.clone());
    let untrusted = summary.as_ref().and_then(|s| s.metrics.untrusted_clients.clone());
    let acc = Stat::of(accuracy);
    Ok(ReportRow {
        name: cfg.name.clone(),
        aggregator: cfg.aggregator.name().to_string(),
        attack: cfg.attack.name().to_string(),
        malicious_fraction: cfg.malicious_fraction,
        repetitions: rep,
        final_accuracy_mean: acc.mean,
        final_accuracy_std: acc.std,
        convergence_round_mean: Stat::of(convergence).mean,
        f1_mean: f1.as_ref().map(|s| s.mean),
        f1_std: f1.as_ref().map(|s| s.std),
        untrusted_mean: untrusted.map(|s| s.mean),
        server_us_per_round: 1e6 * Stat::of(per_round).mean,
    })
}

pub fn collect(roots: &[PathBuf]) -> Result<Vec<ReportRow>, ReportError> {
    let mut rows = Vec::new();
    for root in roots {
        for dir in find_runs(root)? {
            rows.push(summarize_run(&dir)?);
        }
    }
    Ok(rows)
}

/// Markdown table, one row per run.
pub fn render_markdown(rows: &[ReportRow]) -> String {
    let mut s = String::from(
        "| run | aggregator | attack | fraction | reps | final acc | conv round | F1 | untrusted | server us/round |\n\
         |---|---|---|---|---|---|---|---|---|---|\n",
    );
    let opt = |v: Option<f64>, digits: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"));
    for r in rows {
        let f1 = match (r.f1_mean, r.f1_std) {
            (Some(m), Some(sd)) => format!("{m:.3} ± {sd:.3}"),
            _ => "-".to_string(),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.2} | {} | {:.4} ± {:.4} | {:.1} | {} | {} | {:.1} |",
            r.name,
            r.aggregator,
            r.attack,
            r.malicious_fraction,
            r.repetitions,
            r.final_accuracy_mean,
            r.final_accuracy_std,
            r.convergence_round_mean,
            f1,
            opt(r.untrusted_mean, 1),
            r.server_us_per_round,
        );
    }
    s
}

pub fn write_csv(path: &Path, rows: &[ReportRow]) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}
