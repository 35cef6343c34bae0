//! Experiment configuration: TOML ingestion, defaults and validation.
//!
//! A config file has up to five tables, all optional:
//!
//! ```toml
//! [experiment]   # run identity, population, aggregator, selection, repetitions
//! [task]         # synthetic data generator
//! [attack]       # attack kind and its parameters
//! [hyper]        # reputation / training hyperparameters
//! [flare]        # server-side switches (ablations and test hooks)
//! ```
//!
//! Unknown keys are rejected everywhere so typos never fall back to defaults silently.

use std::fmt;
use std::path::{Path, PathBuf};

use flare_core::config::ParamValue;
use flare_core::simenv::TaskConfig;
use flare_core::{AggregatorKind, HyperParams, Role};
use serde::{Deserialize, Serialize};

/// Failure to turn a document into a valid [`ExperimentConfig`].
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid hyperparameters: {0}")]
    Hyper(flare_core::Error),
    #[error("invalid task: {0}")]
    Task(flare_core::Error),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
}

/// Which attack the malicious clients run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMix {
    /// No attack: every client is benign regardless of the fraction.
    None,
    Single(Role),
    /// Round-robin over all six behaviours.
    All,
}

impl AttackMix {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "none" => Some(AttackMix::None),
            "all" => Some(AttackMix::All),
            other => Role::from_name(other).filter(|r| r.is_malicious()).map(AttackMix::Single),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackMix::None => "none",
            AttackMix::Single(r) => r.name(),
            AttackMix::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Uniform,
    Reputation,
}

/// How the standardized distance is scaled before the anomaly threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceScale {
    /// `sqrt(sum_p dev_p^2 / var_p)`.
    Raw,
    /// The raw distance divided by `sqrt(d)`: a root-mean-square z-score.
    PerCoordinate,
}

/// How the stored reputation evolves between participations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReputationMode {
    /// Each participation overwrites the stored value with the round's
    /// composite score, then applies the decay or recovery step.
    Overwrite,
    /// The stored value only moves by the decay or recovery step; the composite
    /// score decides the direction.
    Accumulate,
}

/// Attack parameters; only the ones relevant to the chosen mix are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackParams {
    pub byzantine_variance: f64,
    pub scaling_lambda: f64,
    pub adaptive_prob: f64,
    pub adaptive_lambda: f64,
    pub alie_z: f64,
    pub sm_alpha: f64,
    /// Total bias `B`. Setting it selects the constant schedule `gamma_t = B / T`.
    pub sm_total_bias: Option<f64>,
    /// Horizon `T` of the constant SM schedule; defaults to the number of rounds.
    pub sm_horizon: Option<usize>,
    /// `gamma_t = fraction * median honest norm`, used unless `sm_total_bias` is set.
    pub sm_gamma_fraction: f64,
    /// Project SM updates onto the `c_ldp` ball before sending.
    pub sm_clip: bool,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            byzantine_variance: 1.0,
            scaling_lambda: 5.0,
            adaptive_prob: 0.3,
            adaptive_lambda: 5.0,
            alie_z: 1.5,
            sm_alpha: 0.3,
            sm_total_bias: None,
            sm_horizon: None,
            sm_gamma_fraction: 0.05,
            sm_clip: false,
        }
    }
}

/// Server-side pipeline switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlareOptions {
    /// `false` keeps only clients with `R >= theta`, aggregated with equal weights.
    pub soft_exclusion: bool,
    pub median_clip: bool,
    pub distance_scale: DistanceScale,
    pub reputation_mode: ReputationMode,
    /// Fixes every reputation at this value and skips scoring and evolution.
    pub pin_reputation: Option<f64>,
    /// Treats every participant as trusted.
    pub disable_threshold: bool,
}

impl Default for FlareOptions {
    fn default() -> Self {
        Self {
            soft_exclusion: true,
            median_clip: true,
            distance_scale: DistanceScale::Raw,
            reputation_mode: ReputationMode::Overwrite,
            pin_reputation: None,
            disable_threshold: false,
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub hyper: HyperParams,
    pub task: TaskConfig,
    pub malicious_fraction: f64,
    pub attack: AttackMix,
    pub attack_params: AttackParams,
    pub aggregator: AggregatorKind,
    pub selection: Selection,
    pub flare: FlareOptions,
    pub repetitions: usize,
    pub output: PathBuf,
    /// Full-batch gradient steps used to fit the centralized reference model.
    pub reference_iterations: usize,
    pub reference_learning_rate: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        RawConfig::default().resolve().expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn n_clients(&self) -> usize {
        self.task.n_clients
    }

    pub fn n_malicious(&self) -> usize {
        if self.attack == AttackMix::None {
            return 0;
        }
        (self.malicious_fraction * self.task.n_clients as f64).round() as usize
    }

    /// Number of clients that will be assigned `role` (attacks only).
    pub fn n_malicious_of(&self, role: Role) -> usize {
        let m = self.n_malicious();
        match self.attack {
            AttackMix::None => 0,
            AttackMix::Single(r) => if r == role { m } else { 0 },
            AttackMix::All => (0..m).filter(|k| Role::ATTACKS[k % Role::ATTACKS.len()] == role).count(),
        }
    }

    /// Checks cross-field invariants that single-field parsing cannot see.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.hyper.validate().map_err(ConfigError::Hyper)?;
        self.task.validate().map_err(ConfigError::Task)?;
        if !(0.0..0.5).contains(&self.malicious_fraction) {
            return Err(invalid("malicious_fraction", "must lie in [0, 0.5)"));
        }
        if self.hyper.cohort_size > self.task.n_clients {
            return Err(invalid("cohort_size", "exceeds n_clients"));
        }
        self.aggregator
            .check_cohort(self.hyper.cohort_size)
            .map_err(|e| invalid("aggregator", e.to_string()))?;
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "must be >= 1"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(invalid("name", "must be a plain directory name"));
        }
        let a = &self.attack_params;
        let positive = [
            ("byzantine_variance", a.byzantine_variance),
            ("scaling_lambda", a.scaling_lambda),
            ("adaptive_lambda", a.adaptive_lambda),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, "must be finite and > 0"));
            }
        }
        if !(0.0..=1.0).contains(&a.adaptive_prob) {
            return Err(invalid("adaptive_prob", "must lie in [0, 1]"));
        }
        if !(a.alie_z >= 0.0 && a.alie_z.is_finite()) {
            return Err(invalid("alie_z", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&a.sm_alpha) {
            return Err(invalid("sm_alpha", "must lie in [0, 1]"));
        }
        if a.sm_total_bias.is_some_and(|b| !b.is_finite()) {
            return Err(invalid("sm_total_bias", "must be finite"));
        }
        if a.sm_horizon == Some(0) {
            return Err(invalid("sm_horizon", "must be >= 1"));
        }
        if !(a.sm_gamma_fraction >= 0.0 && a.sm_gamma_fraction.is_finite()) {
            return Err(invalid("sm_gamma_fraction", "must be finite and >= 0"));
        }
        if let Some(r) = self.flare.pin_reputation {
            if !(0.0..=1.0).contains(&r) {
                return Err(invalid("pin_reputation", "must lie in [0, 1]"));
            }
        }
        if self.reference_iterations == 0 || self.reference_learning_rate.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
            return Err(invalid("reference", "iterations and learning rate must be positive"));
        }
        Ok(())
    }

    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        raw.resolve()
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    /// Renders the resolved configuration back to TOML; parsing the result
    /// yields an identical config.
    pub fn to_toml(&self) -> String {
        let hp = &self.hyper;
        let mut hyper = toml::Table::new();
        let floats = [
            ("alpha", hp.alpha),
            ("beta", hp.beta),
            ("tau_d", hp.tau_d),
            ("lambda", hp.lambda),
            ("gamma", hp.gamma),
            ("delta", hp.delta),
            ("theta_base", hp.theta_base),
            ("rho_up", hp.rho_up),
            ("rho_down", hp.rho_down),
            ("alpha_cov", hp.alpha_cov),
            ("tau_conv", hp.tau_conv),
            ("theta_min", hp.theta_min),
            ("theta_max", hp.theta_max),
            ("sigma_ldp", hp.sigma_ldp),
            ("c_ldp", hp.c_ldp),
            ("learning_rate", hp.learning_rate),
        ];
        for (k, v) in floats {
            hyper.insert(k.into(), toml::Value::Float(v));
        }
        let ints = [
            ("participation_window", hp.participation_window as i64),
            ("response_window", hp.response_window as i64),
            ("rounds", hp.rounds as i64),
            ("cohort_size", hp.cohort_size as i64),
            ("local_epochs", hp.local_epochs as i64),
            ("batch_size", hp.batch_size as i64),
            ("seed", hp.seed as i64),
        ];
        for (k, v) in ints {
            hyper.insert(k.into(), toml::Value::Integer(v));
        }
        let raw = RawConfig {
            experiment: RawExperiment {
                name: self.name.clone(),
                n_clients: self.task.n_clients,
                malicious_fraction: self.malicious_fraction,
                attack: self.attack.name().to_string(),
                aggregator: self.aggregator.name().to_string(),
                krum_f: match self.aggregator {
                    AggregatorKind::Krum { f } => Some(f),
                    _ => None,
                },
                trim_fraction: match self.aggregator {
                    AggregatorKind::TrimmedMean { trim } => trim,
                    _ => RawExperiment::default().trim_fraction,
                },
                selection: Some(self.selection),
                repetitions: self.repetitions,
                output: self.output.clone(),
                reference_iterations: self.reference_iterations,
                reference_learning_rate: self.reference_learning_rate,
            },
            task: RawTask {
                samples_per_client: self.task.samples_per_client,
                dirichlet_alpha: self.task.dirichlet_alpha,
                p: self.task.p,
                center_scale: self.task.center_scale,
                noise_std: self.task.noise_std,
                test_samples: self.task.test_samples,
                label_noise: self.task.label_noise,
            },
            attack: self.attack_params.clone(),
            hyper,
            flare: self.flare.clone(),
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} | {} | attack {} @ {:.2} | {} rounds x {} reps",
            self.name,
            self.aggregator.name(),
            self.attack.name(),
            self.malicious_fraction,
            self.hyper.rounds,
            self.repetitions
        )
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    experiment: RawExperiment,
    task: RawTask,
    attack: AttackParams,
    hyper: toml::Table,
    flare: FlareOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawExperiment {
    name: String,
    n_clients: usize,
    malicious_fraction: f64,
    attack: String,
    aggregator: String,
    /// Krum's assumed number of Byzantine clients; defaults to
    /// `floor(malicious_fraction * cohort_size)`.
    krum_f: Option<usize>,
    trim_fraction: f64,
    /// Defaults to reputation-proportional for FLARE, uniform otherwise.
    selection: Option<Selection>,
    repetitions: usize,
    output: PathBuf,
    reference_iterations: usize,
    reference_learning_rate: f64,
}

impl Default for RawExperiment {
    fn default() -> Self {
        Self {
            name: "run".into(),
            n_clients: 100,
            malicious_fraction: 0.0,
            attack: "none".into(),
            aggregator: "flare".into(),
            krum_f: None,
            trim_fraction: 0.2,
            selection: None,
            repetitions: 1,
            output: PathBuf::from("results"),
            reference_iterations: 300,
            reference_learning_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTask {
    samples_per_client: usize,
    dirichlet_alpha: f64,
    p: usize,
    center_scale: f64,
    noise_std: f64,
    test_samples: usize,
    label_noise: f64,
}

impl Default for RawTask {
    fn default() -> Self {
        let t = TaskConfig::default();
        Self {
            samples_per_client: t.samples_per_client,
            dirichlet_alpha: t.dirichlet_alpha,
            p: t.p,
            center_scale: t.center_scale,
            noise_std: t.noise_std,
            test_samples: t.test_samples,
            label_noise: t.label_noise,
        }
    }
}

pub fn parse_aggregator(name: &str, krum_f: usize, trim: f64) -> Option<AggregatorKind> {
    match name {
        "flare" => Some(AggregatorKind::Flare),
        "fedavg" => Some(AggregatorKind::FedAvg),
        "krum" => Some(AggregatorKind::Krum { f: krum_f }),
        "trimmed_mean" => Some(AggregatorKind::TrimmedMean { trim }),
        _ => None,
    }
}

fn hyper_from_table(table: &toml::Table) -> Result<HyperParams, ConfigError> {
    let mut pairs = Vec::with_capacity(table.len());
    for (key, value) in table {
        let v = match value {
            toml::Value::Integer(i) => ParamValue::Int(*i),
            toml::Value::Float(f) => ParamValue::Float(*f),
            _ => return Err(invalid(key, "must be a number")),
        };
        pairs.push((key.as_str(), v));
    }
    HyperParams::from_pairs(pairs).map_err(ConfigError::Hyper)
}

impl RawConfig {
    fn resolve(self) -> Result<ExperimentConfig, ConfigError> {
        let e = self.experiment;
        let hyper = hyper_from_table(&self.hyper)?;
        let attack = AttackMix::parse(&e.attack)
            .ok_or_else(|| invalid("attack", format!("unknown attack `{}`", e.attack)))?;
        let krum_f = e
            .krum_f
            .unwrap_or_else(|| (e.malicious_fraction * hyper.cohort_size as f64).floor() as usize);
        let aggregator = parse_aggregator(&e.aggregator, krum_f, e.trim_fraction)
            .ok_or_else(|| invalid("aggregator", format!("unknown aggregator `{}`", e.aggregator)))?;
        let selection = e.selection.unwrap_or(match aggregator {
            AggregatorKind::Flare => Selection::Reputation,
            _ => Selection::Uniform,
        });
        let t = self.task;
        let cfg = ExperimentConfig {
            name: e.name,
            hyper,
            task: TaskConfig {
                n_clients: e.n_clients,
                samples_per_client: t.samples_per_client,
                dirichlet_alpha: t.dirichlet_alpha,
                p: t.p,
                center_scale: t.center_scale,
                noise_std: t.noise_std,
                test_samples: t.test_samples,
                label_noise: t.label_noise,
            },
            malicious_fraction: e.malicious_fraction,
            attack,
            attack_params: self.attack,
            aggregator,
            selection,
            flare: self.flare,
            repetitions: e.repetitions,
            output: e.output,
            reference_iterations: e.reference_iterations,
            reference_learning_rate: e.reference_learning_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
