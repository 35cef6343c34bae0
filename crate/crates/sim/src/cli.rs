//! Command-line front end: `run`, `sweep` and `report`.
//!
//! Exit status is 0 on success, 2 for anything wrong with the configuration
//! (including unparsable flags) and 1 for failures while running or writing.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, ExperimentConfig};
use crate::experiment::{run_experiment, RunError};
use crate::report::{self, ReportError};

#[derive(Debug, Parser)]
#[command(name = "flare", version, about = "Deterministic FLARE federated-learning robustness simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment (all its repetitions).
    Run(RunArgs),
    /// Run the Cartesian product of fractions, attacks and aggregators.
    Sweep(SweepArgs),
    /// Aggregate finished runs' CSVs into a summary table.
    Report(ReportArgs),
}

/// Flags shared by `run` and `sweep`; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML experiment description; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N")]
    pub rounds: Option<u64>,
    #[arg(long, value_name = "N")]
    pub repetitions: Option<u64>,
    #[arg(long, value_name = "X")]
    pub dirichlet_alpha: Option<f64>,
    /// Parent directory of the run directory.
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Replace an existing run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// none, label_flip, byzantine, scaling, adaptive, alie, sm or all.
    #[arg(long, value_name = "NAME")]
    pub attack: Option<String>,
    /// flare, fedavg, krum or trimmed_mean.
    #[arg(long, value_name = "NAME")]
    pub aggregator: Option<String>,
    #[arg(long, value_name = "X")]
    pub malicious_fraction: Option<f64>,
    /// Run directory name under the output directory.
    #[arg(long, value_name = "NAME")]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[arg(long, value_delimiter = ',', required = true, value_name = "X,X,..")]
    pub fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true, value_name = "NAME,..")]
    pub attacks: Vec<String>,
    /// Defaults to the aggregator of the config file.
    #[arg(long, value_delimiter = ',', value_name = "NAME,..")]
    pub aggregators: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories, or directories containing run directories.
    #[arg(required = true, value_name = "DIR")]
    pub dirs: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Report(ReportError::Config(_)) => 2,
            _ => 1,
        }
    }
}

type Table = toml::Table;

fn section<'a>(doc: &'a mut Table, name: &str) -> Result<&'a mut Table, ConfigError> {
    doc.entry(name.to_string())
        .or_insert_with(|| toml::Value::Table(Table::new()))
        .as_table_mut()
        .ok_or_else(|| ConfigError::Invalid { field: name.to_string(), reason: "must be a table".into() })
}

fn set(doc: &mut Table, table: &str, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    section(doc, table)?.insert(key.to_string(), value);
    Ok(())
}

fn int(field: &str, v: u64) -> Result<toml::Value, ConfigError> {
    i64::try_from(v)
        .map(toml::Value::Integer)
        .map_err(|_| ConfigError::Invalid { field: field.to_string(), reason: "too large".into() })
}

fn load_document(path: Option<&Path>) -> Result<Table, ConfigError> {
    match path {
        None => Ok(Table::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
            Ok(toml::from_str(&text)?)
        }
    }
}

impl Overrides {
    /// Loads the config document and writes the flag values into it, so that
    /// derived defaults (Krum's `f`, the selection rule) see the overrides.
    fn document(&self) -> Result<Table, ConfigError> {
        let mut doc = load_document(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            set(&mut doc, "hyper", "seed", int("seed", seed)?)?;
        }
        if let Some(rounds) = self.rounds {
            set(&mut doc, "hyper", "rounds", int("rounds", rounds)?)?;
        }
        if let Some(reps) = self.repetitions {
            set(&mut doc, "experiment", "repetitions", int("repetitions", reps)?)?;
        }
        if let Some(alpha) = self.dirichlet_alpha {
            set(&mut doc, "task", "dirichlet_alpha", toml::Value::Float(alpha))?;
        }
        if let Some(out) = &self.output {
            set(&mut doc, "experiment", "output", toml::Value::String(out.display().to_string()))?;
        }
        Ok(doc)
    }
}

fn resolve(doc: Table) -> Result<ExperimentConfig, ConfigError> {
    ExperimentConfig::from_toml_str(&toml::to_string(&doc).expect("table serializes"))
}

/// Resolves the configuration of a `run` invocation.
pub fn run_config(args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut doc = args.common.document()?;
    if let Some(a) = &args.attack {
        set(&mut doc, "experiment", "attack", toml::Value::String(a.clone()))?;
    }
    if let Some(a) = &args.aggregator {
        set(&mut doc, "experiment", "aggregator", toml::Value::String(a.clone()))?;
    }
    if let Some(f) = args.malicious_fraction {
        set(&mut doc, "experiment", "malicious_fraction", toml::Value::Float(f))?;
    }
    if let Some(n) = &args.name {
        set(&mut doc, "experiment", "name", toml::Value::String(n.clone()))?;
    }
    resolve(doc)
}

/// Resolves every configuration of a sweep, in aggregator, attack, fraction order.
pub fn sweep_configs(args: &SweepArgs) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let base = args.common.document()?;
    let base_cfg = resolve(base.clone())?;
    let aggregators = if args.aggregators.is_empty() {
        vec![base_cfg.aggregator.name().to_string()]
    } else {
        args.aggregators.clone()
    };
    let mut out = Vec::new();
    for agg in &aggregators {
        for attack in &args.attacks {
            for &f in &args.fractions {
                let mut doc = base.clone();
                set(&mut doc, "experiment", "aggregator", toml::Value::String(agg.clone()))?;
                set(&mut doc, "experiment", "attack", toml::Value::String(attack.clone()))?;
                set(&mut doc, "experiment", "malicious_fraction", toml::Value::Float(f))?;
                let name = format!("{}_{agg}_{attack}_f{f}", base_cfg.name);
                set(&mut doc, "experiment", "name", toml::Value::String(name))?;
                out.push(resolve(doc)?);
            }
        }
    }
    Ok(out)
}

fn print_summary(cfg: &ExperimentConfig, report: &crate::experiment::ExperimentReport) {
    let m = &report.summary.metrics;
    println!("{cfg}");
    println!("  output            {}", report.dir.display());
    println!("  final accuracy    {:.4} ± {:.4}", m.final_accuracy.mean, m.final_accuracy.std);
    println!("  convergence round {:.1}", m.convergence_round.mean);
    if let Some(r) = &m.robustness {
        println!("  robustness        {:.4} ± {:.4}", r.mean, r.std);
    }
    if let Some(f1) = &m.f1 {
        println!("  detection F1      {:.4} ± {:.4}", f1.mean, f1.std);
    }
    if let (Some(d), Some(e)) = (&m.sm_drift_per_round, &m.sm_expected_drift_per_round) {
        println!("  SM drift/round    {:.3e} (expected {:.3e})", d.mean, e.mean);
    }
    println!("  server time/round {:.1} us", 1e6 * m.server_seconds_per_round.mean);
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = run_config(&args)?;
            let report = run_experiment(&cfg, args.common.force)?;
            print_summary(&cfg, &report);
        }
        Command::Sweep(args) => {
            let configs = sweep_configs(&args)?;
            let mut dirs = Vec::with_capacity(configs.len());
            for cfg in &configs {
                let report = run_experiment(cfg, args.common.force)?;
                print_summary(cfg, &report);
                dirs.push(report.dir);
            }
            let rows = dirs.iter().map(|d| report::summarize_run(d)).collect::<Result<Vec<_>, _>>()?;
            print!("\n{}", report::render_markdown(&rows));
        }
        Command::Report(args) => {
            let rows = report::collect(&args.dirs)?;
            print!("{}", report::render_markdown(&rows));
            if let Some(path) = &args.csv {
                report::write_csv(path, &rows).map_err(ReportError::from)?;
            }
        }
    }
    Ok(())
}

/// Parses the process arguments, runs the command and maps the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are successful exits.
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
