//! Per-round evidence scores and their adaptive combination.
//!
//! Three scores are computed for every participant:
//!
//! - `r1` consistency: cosine of the update against the client's own update EMA,
//!   folded into an exponentially decaying recursion;
//! - `r2` statistical anomaly: standardized Euclidean distance of the update
//!   from the cohort mean under a diagonal covariance tracked incrementally;
//! - `r3` temporal behaviour: participation rate and response-time stability.
//!
//! They are combined with weights re-derived each round from how well every
//! dimension separates previously suspicious clients from the rest.

use alloc::vec;
use alloc::vec::Vec;

use crate::assessment::AttackPattern;
use crate::client::ClientState;
use crate::error::{Error, Result};
use crate::math;
use crate::vector::{cosine_similarity, ModelVector};

/// Variance floor applied when inverting the per-parameter variance.
pub const VAR_FLOOR: f64 = 1e-12;

/// Result of one consistency step for a single client.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyStep {
    /// Stored score in `[0, 1]`.
    pub r1: f64,
    /// Raw recursion value in `[-1, 1]`.
    pub raw: f64,
    pub ema: ModelVector,
}

/// Consistency score of `update` against the client's update history.
///
/// The raw recursion `s = alpha * s_prev + (1 - alpha) * cos(update, ema)`
/// lives in `[-1, 1]`; the stored score is `(s + 1) / 2`. A client without
/// history gets the neutral 0.5 and its EMA is seeded with `update`.
pub fn consistency_score(
    client: &ClientState,
    update: &ModelVector,
    alpha: f64,
) -> Result<ConsistencyStep> {
    let Some(ema) = client.update_ema.as_ref() else {
        return Ok(ConsistencyStep { r1: 0.5, raw: 0.0, ema: update.clone() });
    };
    let cos = cosine_similarity(update, ema)?;
    let raw = (alpha * client.raw_consistency + (1.0 - alpha) * cos).clamp(-1.0, 1.0);
    let mut next = ema.scaled(alpha);
    next.add_scaled(1.0 - alpha, update)?;
    Ok(ConsistencyStep { r1: (raw + 1.0) / 2.0, raw, ema: next })
}

/// Exponentially decayed per-parameter variance of cohort updates.
///
/// Memory is `O(d)`; no covariance matrix is ever formed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VarianceTracker {
    variance: Vec<f64>,
    initialized: bool,
}

impl VarianceTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    /// Folds one round of updates into the variance and returns the cohort mean.
    ///
    /// `var <- alpha_cov * var + (1 - alpha_cov) / n * sum_i (u_i - mean)^2`,
    /// element-wise, with `var = 0` before the first call.
    pub fn update(&mut self, updates: &[ModelVector], alpha_cov: f64) -> Result<ModelVector> {
        let mean = crate::vector::mean(updates)?;
        let dim = mean.dim();
        if self.initialized {
            Error::check_dim(self.variance.len(), dim)?;
            self.variance.iter_mut().for_each(|v| *v *= alpha_cov);
        } else {
            self.variance = vec![0.0; dim];
        }
        let w = (1.0 - alpha_cov) / updates.len() as f64;
        for u in updates {
            for ((var, x), m) in self.variance.iter_mut().zip(u.iter()).zip(mean.iter()) {
                let dev = x - m;
                *var += w * dev * dev;
            }
        }
        self.initialized = true;
        Ok(mean)
    }
}

/// Standardized Euclidean distance of `update` from `cohort_mean`.
pub fn anomaly_distance(
    update: &ModelVector,
    cohort_mean: &ModelVector,
    tracker: &VarianceTracker,
) -> Result<f64> {
    if !tracker.initialized {
        return Err(Error::InvalidParameter {
            name: "tracker",
            reason: "variance tracker not initialized",
        });
    }
    Error::check_dim(tracker.variance.len(), update.dim())?;
    Error::check_dim(tracker.variance.len(), cohort_mean.dim())?;
    let sum: f64 = update
        .iter()
        .zip(cohort_mean.iter())
        .zip(&tracker.variance)
        .map(|((x, m), v)| {
            let dev = x - m;
            dev * dev / v.max(VAR_FLOOR)
        })
        .sum();
    Ok(math::sqrt(sum))
}

/// `1` up to `tau_d`, then `exp(-lambda * (d - tau_d))`.
pub fn anomaly_score(distance: f64, tau_d: f64, lambda: f64) -> f64 {
    if distance <= tau_d {
        1.0
    } else {
        math::exp(-lambda * (distance - tau_d))
    }
}

/// Fraction of the recorded rounds in which the client took part.
pub fn participation_rate(client: &ClientState) -> f64 {
    let window = &client.participation;
    if window.is_empty() {
        return 0.0;
    }
    window.iter().filter(|&&p| p).count() as f64 / window.len() as f64
}

/// Sample standard deviation of the response-time window; 0 below two observations.
pub fn response_time_std(client: &ClientState) -> f64 {
    sample_std(client.response_times.iter().copied())
}

pub(crate) fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|x| (x - mean) * (x - mean)).sum();
    math::sqrt(ss / (n - 1) as f64)
}

pub fn temporal_score(client: &ClientState, beta: f64) -> f64 {
    let p = participation_rate(client);
    let sigma = response_time_std(client);
    (beta * p + (1.0 - beta) / (1.0 + sigma)).clamp(0.0, 1.0)
}

/// Combination weights over the three evidence dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicWeights {
    pub w: [f64; 3],
    pub previous: [f64; 3],
}

impl Default for DynamicWeights {
    fn default() -> Self {
        let third = 1.0 / 3.0;
        Self { w: [third; 3], previous: [third; 3] }
    }
}

/// Inputs to one dynamic weight computation.
#[derive(Debug, Clone, Copy)]
pub struct WeightInputs<'a> {
    /// `[r1, r2, r3]` for each cohort member.
    pub components: &'a [[f64; 3]],
    /// Reputation of each cohort member at the end of the previous round.
    pub prev_reputation: &'a [f64],
    pub prev_threshold: f64,
    pub conv: f64,
    pub pattern: AttackPattern,
    pub tau_conv: f64,
    /// Blend with the previous weights (every round after the first).
    pub smooth: bool,
}

/// Raw discriminative power per dimension: cohort variance times the
/// separation between the suspicious set and its complement.
pub fn discriminative_power(components: &[[f64; 3]], prev_reputation: &[f64], prev_threshold: f64) -> Result<[f64; 3]> {
    if components.is_empty() {
        return Err(Error::EmptyCohort);
    }
    if components.len() != prev_reputation.len() {
        return Err(Error::LengthMismatch { left: components.len(), right: prev_reputation.len() });
    }
    let n = components.len() as f64;
    let cut = prev_threshold / 2.0;
    let mut eta = [0.0; 3];
    for (j, e) in eta.iter_mut().enumerate() {
        let mean = components.iter().map(|c| c[j]).sum::<f64>() / n;
        let var = components.iter().map(|c| (c[j] - mean) * (c[j] - mean)).sum::<f64>() / n;

        let (mut sus_sum, mut sus_n, mut ok_sum, mut ok_n) = (0.0, 0usize, 0.0, 0usize);
        for (c, &r) in components.iter().zip(prev_reputation) {
            if r < cut {
                sus_sum += c[j];
                sus_n += 1;
            } else {
                ok_sum += c[j];
                ok_n += 1;
            }
        }
        let sep = if sus_n == 0 || ok_n == 0 {
            0.0
        } else {
            (ok_sum / ok_n as f64 - sus_sum / sus_n as f64).abs()
        };
        *e = var * sep;
    }
    Ok(eta)
}

/// Applies the convergence-phase multipliers and the attack-pattern boost.
pub fn adjust_power(mut eta: [f64; 3], conv: f64, tau_conv: f64, pattern: AttackPattern) -> [f64; 3] {
    if conv > tau_conv {
        eta[0] *= 1.5;
        eta[2] *= 1.2;
    } else {
        eta[1] *= 1.3;
        eta[0] *= 0.8;
    }
    match pattern {
        AttackPattern::GradientScaling => eta[1] *= 2.0,
        AttackPattern::AdaptiveAttack => eta[2] *= 2.0,
        AttackPattern::LabelFlipping => eta[0] *= 1.8,
        AttackPattern::None => {}
    }
    eta
}

pub fn softmax3(eta: [f64; 3]) -> [f64; 3] {
    let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = eta.map(|x| math::exp(x - max));
    let total: f64 = e.iter().sum();
    e.map(|x| x / total)
}

pub fn compute_dynamic_weights(inputs: WeightInputs<'_>, prev: &DynamicWeights) -> Result<DynamicWeights> {
    let eta = discriminative_power(inputs.components, inputs.prev_reputation, inputs.prev_threshold)?;
    let eta = adjust_power(eta, inputs.conv, inputs.tau_conv, inputs.pattern);
    let mut w = softmax3(eta);
    if inputs.smooth {
        for (new, old) in w.iter_mut().zip(prev.w) {
            *new = 0.7 * *new + 0.3 * old;
        }
    }
    Ok(DynamicWeights { w, previous: prev.w })
}

/// Weighted combination `sum_j w_j r_j`, in `[0, 1]` for components in `[0, 1]`.
pub fn composite_score(components: &[f64; 3], weights: &DynamicWeights) -> f64 {
    let r: f64 = components.iter().zip(weights.w).map(|(c, w)| c * w).sum();
    r.clamp(0.0, 1.0)
}
