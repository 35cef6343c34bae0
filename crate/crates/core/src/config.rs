//! Hyperparameters shared by every stage of a round.

use alloc::string::ToString;

use crate::error::{Error, Result};

/// Scalar value assigned to a hyperparameter by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
}

impl ParamValue {
    fn as_f64(self) -> f64 {
        match self {
            ParamValue::Int(i) => i as f64,
            ParamValue::Float(f) => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Consistency decay factor.
    pub alpha: f64,
    /// Weight of participation against response-time stability.
    pub beta: f64,
    /// Standardized distance above which the anomaly score decays.
    pub tau_d: f64,
    /// Anomaly penalty severity.
    pub lambda: f64,
    /// Influence of model convergence on the threshold.
    pub gamma: f64,
    /// Influence of the anomaly rate on the threshold.
    pub delta: f64,
    pub theta_base: f64,
    pub rho_up: f64,
    pub rho_down: f64,
    /// Decay of the per-parameter variance EMA.
    pub alpha_cov: f64,
    /// Convergence level separating the early and late weighting regimes.
    pub tau_conv: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Local DP noise multiplier; noise std is `c_ldp * sigma_ldp`.
    pub sigma_ldp: f64,
    /// Client-side L2 clip applied before noise.
    pub c_ldp: f64,
    /// Participation window, in rounds.
    pub participation_window: usize,
    /// Response-time window, in observations.
    pub response_window: usize,
    pub rounds: usize,
    pub cohort_size: usize,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            beta: 0.7,
            tau_d: 2.5,
            lambda: 0.5,
            gamma: 0.4,
            delta: 0.5,
            theta_base: 0.5,
            rho_up: 0.05,
            rho_down: 0.15,
            alpha_cov: 0.9,
            tau_conv: 0.8,
            theta_min: 0.1,
            theta_max: 0.9,
            sigma_ldp: 0.0,
            c_ldp: 1.0,
            participation_window: 10,
            response_window: 20,
            rounds: 200,
            cohort_size: 10,
            local_epochs: 5,
            learning_rate: 0.001,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub const FIELDS: &'static [&'static str] = &[
        "alpha",
        "beta",
        "tau_d",
        "lambda",
        "gamma",
        "delta",
        "theta_base",
        "rho_up",
        "rho_down",
        "alpha_cov",
        "tau_conv",
        "theta_min",
        "theta_max",
        "sigma_ldp",
        "c_ldp",
        "participation_window",
        "response_window",
        "rounds",
        "cohort_size",
        "local_epochs",
        "learning_rate",
        "batch_size",
        "seed",
    ];

    /// Assigns one field by name. Does not validate cross-field invariants.
    pub fn set(&mut self, name: &str, value: ParamValue) -> Result<()> {
        let float = value.as_f64();
        match name {
            "alpha" => self.alpha = float,
            "beta" => self.beta = float,
            "tau_d" => self.tau_d = float,
            "lambda" => self.lambda = float,
            "gamma" => self.gamma = float,
            "delta" => self.delta = float,
            "theta_base" => self.theta_base = float,
            "rho_up" => self.rho_up = float,
            "rho_down" => self.rho_down = float,
            "alpha_cov" => self.alpha_cov = float,
            "tau_conv" => self.tau_conv = float,
            "theta_min" => self.theta_min = float,
            "theta_max" => self.theta_max = float,
            "sigma_ldp" => self.sigma_ldp = float,
            "c_ldp" => self.c_ldp = float,
            "learning_rate" => self.learning_rate = float,
            "participation_window" => self.participation_window = count("participation_window", value)?,
            "response_window" => self.response_window = count("response_window", value)?,
            "rounds" => self.rounds = count("rounds", value)?,
            "cohort_size" => self.cohort_size = count("cohort_size", value)?,
            "local_epochs" => self.local_epochs = count("local_epochs", value)?,
            "batch_size" => self.batch_size = count("batch_size", value)?,
            "seed" => match value {
                ParamValue::Int(i) if i >= 0 => self.seed = i as u64,
                _ => {
                    return Err(Error::InvalidParameter {
                        name: "seed",
                        reason: "must be a non-negative integer",
                    })
                }
            },
            other => return Err(Error::UnknownField(other.to_string())),
        }
        Ok(())
    }

    /// Builds validated parameters from `(name, value)` pairs, falling back to
    /// defaults for every omitted field.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, ParamValue)>,
    {
        let mut hp = Self::default();
        for (name, value) in pairs {
            hp.set(name, value)?;
        }
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |field: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvariantViolation { field, bound: "must lie in [0, 1]" })
            }
        };
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvariantViolation { field, bound: "must be > 0" })
            }
        };
        let nonzero = |field: &'static str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::InvariantViolation { field, bound: "must be >= 1" })
            }
        };

        unit("alpha", self.alpha)?;
        unit("beta", self.beta)?;
        unit("alpha_cov", self.alpha_cov)?;
        unit("tau_conv", self.tau_conv)?;
        unit("rho_up", self.rho_up)?;
        unit("rho_down", self.rho_down)?;
        if self.rho_up >= self.rho_down {
            return Err(Error::InvariantViolation {
                field: "rho_up",
                bound: "rho_up < rho_down required",
            });
        }
        unit("theta_min", self.theta_min)?;
        unit("theta_max", self.theta_max)?;
        if !(self.theta_min <= self.theta_base && self.theta_base <= self.theta_max) {
            return Err(Error::InvariantViolation {
                field: "theta_base",
                bound: "theta_min <= theta_base <= theta_max required",
            });
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvariantViolation { field: "gamma", bound: "must be >= 0" });
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvariantViolation { field: "delta", bound: "must be >= 0" });
        }
        positive("tau_d", self.tau_d)?;
        positive("lambda", self.lambda)?;
        if !(self.sigma_ldp.is_finite() && self.sigma_ldp >= 0.0) {
            return Err(Error::InvariantViolation { field: "sigma_ldp", bound: "must be >= 0" });
        }
        positive("c_ldp", self.c_ldp)?;
        positive("learning_rate", self.learning_rate)?;
        nonzero("participation_window", self.participation_window)?;
        nonzero("response_window", self.response_window)?;
        nonzero("rounds", self.rounds)?;
        nonzero("cohort_size", self.cohort_size)?;
        nonzero("batch_size", self.batch_size)?;
        Ok(())
    }
}

fn count(name: &'static str, value: ParamValue) -> Result<usize> {
    match value {
        ParamValue::Int(i) if i >= 0 => Ok(i as usize),
        ParamValue::Float(f) if f >= 0.0 && crate::math::floor(f) == f => Ok(f as usize),
        _ => Err(Error::InvalidParameter { name, reason: "must be a non-negative integer" }),
    }
}
