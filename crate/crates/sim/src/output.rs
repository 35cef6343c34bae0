//! On-disk artifacts of a run.
//!
//! Each experiment directory `<output>/<name>/` holds
//!
//! * `rounds_rep{k}.csv`: one row per round with the columns of [`RoundRow`],
//!   in declaration order. Empty cells mean "not produced by this aggregator".
//! * `timing_rep{k}.csv`: `round,server_seconds`. Wall time lives in its own
//!   file so the round CSVs stay byte-identical across replays.
//! * `summary.toml`: per-metric mean, sample std and per-repetition values.
//! * `config.toml`: the fully resolved configuration, parseable as input.

use std::fs;
use std::path::{Path, PathBuf};

use flare_core::Role;
use serde::{Deserialize, Serialize};

use crate::engine::RoundLog;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("{0} already exists; pass --force to overwrite it")]
    Exists(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

/// Column set of the per-round CSV. Reordering or renaming a field changes
/// the file format; the golden-file test pins it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: usize,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub theta: Option<f64>,
    pub conv: Option<f64>,
    pub anomaly_rate: Option<f64>,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub w3: Option<f64>,
    pub pattern: Option<String>,
    pub trusted: Option<usize>,
    pub suspicious: Option<usize>,
    pub untrusted: Option<usize>,
    pub tp: Option<usize>,
    pub fp: Option<usize>,
    pub tn: Option<usize>,
    #[serde(rename = "fn")]
    pub fn_: Option<usize>,
    pub cohort_malicious: usize,
    pub attacks_sent: usize,
    pub aggregated: usize,
    pub stalled: bool,
    pub median_norm: f64,
    pub rep_benign: Option<f64>,
    pub rep_label_flip: Option<f64>,
    pub rep_byzantine: Option<f64>,
    pub rep_scaling: Option<f64>,
    pub rep_adaptive: Option<f64>,
    pub rep_alie: Option<f64>,
    pub rep_sm: Option<f64>,
    pub displacement: Option<f64>,
    pub sm_drift: Option<f64>,
    pub sm_gamma: Option<f64>,
}

impl From<&RoundLog> for RoundRow {
    fn from(l: &RoundLog) -> Self {
        let rep = |role: Role| {
            let k = Role::ALL.iter().position(|&r| r == role).expect("role listed");
            l.mean_reputation[k]
        };
        Self {
            round: l.round,
            test_loss: l.test_loss,
            test_accuracy: l.test_accuracy,
            theta: l.theta,
            conv: l.conv,
            anomaly_rate: l.anomaly_rate,
            w1: l.weights.map(|w| w[0]),
            w2: l.weights.map(|w| w[1]),
            w3: l.weights.map(|w| w[2]),
            pattern: l.pattern.map(|p| p.name().to_string()),
            trusted: l.classes.map(|c| c[0]),
            suspicious: l.classes.map(|c| c[1]),
            untrusted: l.classes.map(|c| c[2]),
            tp: l.confusion.map(|c| c.tp),
            fp: l.confusion.map(|c| c.fp),
            tn: l.confusion.map(|c| c.tn),
            fn_: l.confusion.map(|c| c.fn_),
            cohort_malicious: l.cohort_malicious,
            attacks_sent: l.attacks_sent,
            aggregated: l.aggregated,
            stalled: l.stalled,
            median_norm: l.median_norm,
            rep_benign: rep(Role::Benign),
            rep_label_flip: rep(Role::LabelFlip),
            rep_byzantine: rep(Role::ByzantineGradient),
            rep_scaling: rep(Role::GradientScaling),
            rep_adaptive: rep(Role::Adaptive),
            rep_alie: rep(Role::Alie),
            rep_sm: rep(Role::StatisticalMimicry),
            displacement: l.displacement,
            sm_drift: l.sm_drift,
            sm_gamma: l.sm_gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub round: usize,
    pub server_seconds: f64,
}

pub fn rounds_file(rep: usize) -> String {
    format!("rounds_rep{rep}.csv")
}

pub fn timing_file(rep: usize) -> String {
    format!("timing_rep{rep}.csv")
}

pub const SUMMARY_FILE: &str = "summary.toml";
pub const CONFIG_FILE: &str = "config.toml";

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_rounds(path: &Path, logs: &[RoundLog]) -> Result<(), OutputError> {
    write_rows(path, logs.iter().map(RoundRow::from))
}

pub fn write_timing(path: &Path, logs: &[RoundLog]) -> Result<(), OutputError> {
    write_rows(path, logs.iter().map(|l| TimingRow { round: l.round, server_seconds: l.server_seconds }))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, OutputError> {
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

pub fn read_rounds(path: &Path) -> Result<Vec<RoundRow>, OutputError> {
    read_rows(path)
}

pub fn read_timing(path: &Path) -> Result<Vec<TimingRow>, OutputError> {
    read_rows(path)
}

/// Mean, sample standard deviation and the raw per-repetition values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl Stat {
    pub fn of(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / n };
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std, values }
    }

    /// `None` if any repetition lacks the value.
    pub fn of_optional(values: impl IntoIterator<Item = Option<f64>>) -> Option<Self> {
        values.into_iter().collect::<Option<Vec<f64>>>().filter(|v| !v.is_empty()).map(Self::of)
    }
}

/// Pooled summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub aggregator: String,
    pub attack: String,
    pub malicious_fraction: f64,
    pub rounds: usize,
    pub repetitions: usize,
    pub seeds: Vec<u64>,
    pub metrics: SummaryMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    pub final_accuracy: Stat,
    pub final_loss: Stat,
    pub convergence_round: Stat,
    pub reference_accuracy: Stat,
    pub reference_loss: Stat,
    /// Share of rounds more than 5 points below a clean companion run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robustness: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub untrusted_clients: Option<Stat>,
    pub server_seconds_total: Stat,
    pub server_seconds_per_round: Stat,
    /// Measured per-round model displacement along the SM direction caused by SM payloads.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sm_drift_per_round: Option<Stat>,
    /// `rho * mean(gamma_t)`: the impact-model prediction for the same quantity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sm_expected_drift_per_round: Option<Stat>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), OutputError> {
    let text = toml::to_string(summary).expect("summary serializes");
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<Summary, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|source| OutputError::Toml { path: path.to_path_buf(), source })
}

/// Creates a fresh experiment directory. An existing one is an error unless
/// `force` is set, in which case it is removed first.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<(), OutputError> {
    if dir.exists() {
        if !force {
            return Err(OutputError::Exists(dir.to_path_buf()));
        }
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), OutputError> {
    fs::write(path, text).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_uses_sample_std() {
        let s = Stat::of(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-12);
        assert_eq!(Stat::of(vec![4.0]).std, 0.0);
        assert_eq!(Stat::of_optional([Some(1.0), None]), None);
        assert_eq!(Stat::of_optional(Vec::new()), None);
    }

    #[test]
    fn prepare_dir_refuses_then_forces() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        prepare_dir(&dir, false).unwrap();
        fs::write(dir.join("stale"), "x").unwrap();
        assert!(matches!(prepare_dir(&dir, false), Err(OutputError::Exists(_))));
        prepare_dir(&dir, true).unwrap();
        assert!(!dir.join("stale").exists());
    }
}
