//! Repetitions, clean companion runs and artifact writing for one experiment.

use std::path::PathBuf;

use flare_core::metrics;
use flare_core::Role;
use rayon::prelude::*;

use crate::config::{AttackMix, ExperimentConfig};
use crate::engine::{run_once, RunOutcome};
use crate::output::{self, OutputError, Stat, Summary, SummaryMetrics};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("simulation failed: {0}")]
    Sim(#[from] flare_core::Error),
    #[error(transparent)]
    Output(#[from] OutputError),
}

/// Everything one experiment produced, in memory and on disk.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub outcomes: Vec<RunOutcome>,
    /// Clean companions (same seed, no attack) when the experiment has an attack.
    pub clean: Option<Vec<RunOutcome>>,
    pub summary: Summary,
}

/// Seed of repetition `rep`: the master seed plus the repetition index.
pub fn repetition_seed(cfg: &ExperimentConfig, rep: usize) -> u64 {
    cfg.hyper.seed.wrapping_add(rep as u64)
}

/// The same experiment with every client benign.
pub fn clean_companion(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { attack: AttackMix::None, malicious_fraction: 0.0, ..cfg.clone() }
}

/// Runs all repetitions (and clean companions) without touching the disk.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(Vec<RunOutcome>, Option<Vec<RunOutcome>>), RunError> {
    let seeds: Vec<u64> = (0..cfg.repetitions).map(|k| repetition_seed(cfg, k)).collect();
    let outcomes = seeds.par_iter().map(|&s| run_once(cfg, s)).collect::<Result<Vec<_>, _>>()?;
    let clean = if cfg.n_malicious() > 0 {
        let companion = clean_companion(cfg);
        Some(seeds.par_iter().map(|&s| run_once(&companion, s)).collect::<Result<Vec<_>, _>>()?)
    } else {
        None
    };
    Ok((outcomes, clean))
}

pub fn summarize(cfg: &ExperimentConfig, outcomes: &[RunOutcome], clean: Option<&[RunOutcome]>) -> Result<Summary, RunError> {
    let stat = |f: &dyn Fn(&RunOutcome) -> f64| Stat::of(outcomes.iter().map(f).collect());
    let optional = |f: &dyn Fn(&RunOutcome) -> Option<f64>| Stat::of_optional(outcomes.iter().map(f));

    let robustness = match clean {
        Some(clean) => {
            let values = outcomes
                .iter()
                .zip(clean)
                .map(|(o, c)| metrics::robustness(&o.accuracies(), &c.accuracies()))
                .collect::<Result<Vec<_>, _>>()?;
            Some(Stat::of(values))
        }
        None => None,
    };
    let sm_share = cfg.n_malicious_of(Role::StatisticalMimicry) as f64 / cfg.n_clients() as f64;

    Ok(Summary {
        name: cfg.name.clone(),
        aggregator: cfg.aggregator.name().to_string(),
        attack: cfg.attack.name().to_string(),
        malicious_fraction: cfg.malicious_fraction,
        rounds: cfg.hyper.rounds,
        repetitions: cfg.repetitions,
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        metrics: SummaryMetrics {
            final_accuracy: stat(&|o| o.final_accuracy()),
            final_loss: stat(&|o| o.final_loss()),
            convergence_round: stat(&|o| o.convergence_round().map_or(f64::NAN, |r| r as f64)),
            reference_accuracy: stat(&|o| o.reference_accuracy),
            reference_loss: stat(&|o| o.reference_loss),
            robustness,
            precision: optional(&|o| o.detection().map(|d| d.precision)),
            recall: optional(&|o| o.detection().map(|d| d.recall)),
            f1: optional(&|o| o.detection().map(|d| d.f1)),
            untrusted_clients: optional(&|o| o.untrusted_count().map(|c| c as f64)),
            server_seconds_total: stat(&|o| o.server_seconds()),
            server_seconds_per_round: stat(&|o| o.server_seconds() / o.logs.len().max(1) as f64),
            sm_drift_per_round: optional(&|o| o.mean_sm_drift()),
            sm_expected_drift_per_round: optional(&|o| o.mean_sm_gamma().map(|g| sm_share * g)),
        },
    })
}

/// Runs the experiment and writes its artifacts under `<output>/<name>/`.
pub fn run_experiment(cfg: &ExperimentConfig, force: bool) -> Result<ExperimentReport, RunError> {
    let dir = cfg.output.join(&cfg.name);
    output::prepare_dir(&dir, force)?;
    let (outcomes, clean) = simulate(cfg)?;
    for (k, o) in outcomes.iter().enumerate() {
        output::write_rounds(&dir.join(output::rounds_file(k)), &o.logs)?;
        output::write_timing(&dir.join(output::timing_file(k)), &o.logs)?;
    }
    let summary = summarize(cfg, &outcomes, clean.as_deref())?;
    output::write_summary(&dir.join(output::SUMMARY_FILE), &summary)?;
    output::write_text(&dir.join(output::CONFIG_FILE), &cfg.to_toml())?;
    Ok(ExperimentReport { dir, outcomes, clean, summary })
}
