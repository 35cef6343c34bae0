//! Attack behaviours.
//!
//! Label flipping poisons the data and so happens during local training; all
//! other attacks transform (or replace) the honest update here. ALIE and
//! statistical mimicry (SM) attackers collude: they pool their honest
//! gradients each round to estimate the honest mean and per-parameter spread.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::aggregation::{clip_update, median_norm};
use crate::client::Role;
use crate::error::{Error, Result};
use crate::math;
use crate::vector::ModelVector;

/// Per-round drift schedule of the SM attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmSchedule {
    /// `gamma_t = total_bias / horizon` for `t <= horizon`, 0 afterwards.
    Constant { total_bias: f64, horizon: usize },
    /// `gamma_t = fraction * median honest norm of the pool` in round `t`.
    RelativeToNorm { fraction: f64 },
}

impl SmSchedule {
    pub fn gamma(&self, t: usize, pool: &CollusionPool) -> f64 {
        match *self {
            SmSchedule::Constant { total_bias, horizon } => {
                if t >= 1 && t <= horizon {
                    total_bias / horizon as f64
                } else {
                    0.0
                }
            }
            SmSchedule::RelativeToNorm { fraction } => fraction * pool.median_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmSpec {
    /// Weight of the synthetic template against the own honest gradient.
    pub mix_alpha: f64,
    pub schedule: SmSchedule,
    /// Unit drift direction.
    pub direction: ModelVector,
    /// Optional projection onto an L2 ball before sending.
    pub clip: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpec {
    LabelFlip,
    ByzantineGradient { variance: f64 },
    GradientScaling { lambda: f64 },
    /// Sends the scaled payload with probability `attack_prob`, honest otherwise.
    Adaptive { attack_prob: f64, payload_lambda: f64 },
    Alie { z: f64, direction: ModelVector },
    StatisticalMimicry(SmSpec),
}

impl AttackSpec {
    pub fn role(&self) -> Role {
        match self {
            AttackSpec::LabelFlip => Role::LabelFlip,
            AttackSpec::ByzantineGradient { .. } => Role::ByzantineGradient,
            AttackSpec::GradientScaling { .. } => Role::GradientScaling,
            AttackSpec::Adaptive { .. } => Role::Adaptive,
            AttackSpec::Alie { .. } => Role::Alie,
            AttackSpec::StatisticalMimicry(_) => Role::StatisticalMimicry,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit_direction = |d: &ModelVector| {
            if (d.norm() - 1.0).abs() < 1e-9 {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name: "direction", reason: "must have unit L2 norm" })
            }
        };
        match self {
            AttackSpec::LabelFlip => Ok(()),
            AttackSpec::ByzantineGradient { variance } if *variance > 0.0 => Ok(()),
            AttackSpec::ByzantineGradient { .. } => {
                Err(Error::InvalidParameter { name: "variance", reason: "must be > 0" })
            }
            AttackSpec::GradientScaling { lambda } if *lambda > 0.0 => Ok(()),
            AttackSpec::GradientScaling { .. } => {
                Err(Error::InvalidParameter { name: "lambda", reason: "must be > 0" })
            }
            AttackSpec::Adaptive { attack_prob, payload_lambda } => {
                if !(0.0..=1.0).contains(attack_prob) {
                    return Err(Error::InvalidParameter { name: "attack_prob", reason: "must lie in [0, 1]" });
                }
                if *payload_lambda <= 0.0 {
                    return Err(Error::InvalidParameter { name: "payload_lambda", reason: "must be > 0" });
                }
                Ok(())
            }
            AttackSpec::Alie { z, direction } => {
                if !z.is_finite() || *z < 0.0 {
                    return Err(Error::InvalidParameter { name: "z", reason: "must be >= 0" });
                }
                unit_direction(direction)
            }
            AttackSpec::StatisticalMimicry(sm) => {
                if !(0.0..=1.0).contains(&sm.mix_alpha) {
                    return Err(Error::InvalidParameter { name: "mix_alpha", reason: "must lie in [0, 1]" });
                }
                if let SmSchedule::Constant { horizon: 0, .. } = sm.schedule {
                    return Err(Error::InvalidParameter { name: "horizon", reason: "must be >= 1" });
                }
                unit_direction(&sm.direction)
            }
        }
    }
}

/// Honest statistics estimated by colluding attackers from their own gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct CollusionPool {
    pub members: Vec<usize>,
    pub mean: ModelVector,
    /// Per-parameter standard deviation (sample std; zero below two members).
    pub std: ModelVector,
    pub median_norm: f64,
}

impl CollusionPool {
    pub fn from_members(members: Vec<usize>, honest: &[ModelVector]) -> Result<Self> {
        if members.len() != honest.len() {
            return Err(Error::LengthMismatch { left: members.len(), right: honest.len() });
        }
        let mean = crate::vector::mean(honest)?;
        let n = honest.len();
        let std = if n < 2 {
            ModelVector::zeros(mean.dim())
        } else {
            let mut var = alloc::vec![0.0; mean.dim()];
            for g in honest {
                for ((v, x), m) in var.iter_mut().zip(g.iter()).zip(mean.iter()) {
                    *v += (x - m) * (x - m);
                }
            }
            ModelVector::from_raw(var.into_iter().map(|v| math::sqrt(v / (n - 1) as f64)).collect())
        };
        let median_norm = median_norm(honest)?;
        Ok(Self { members, mean, std, median_norm })
    }

    /// Pool made of a single attacker's own gradient (zero spread).
    pub fn solo(id: usize, honest: &ModelVector) -> Self {
        Self {
            members: alloc::vec![id],
            mean: honest.clone(),
            std: ModelVector::zeros(honest.dim()),
            median_norm: honest.norm(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Pure noise `N(0, variance)` per coordinate.
pub fn byzantine_update<R: Rng + ?Sized>(dim: usize, variance: f64, rng: &mut R) -> ModelVector {
    let std = math::sqrt(variance);
    let values = (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        })
        .collect();
    ModelVector::from_raw(values)
}

pub fn scaling_update(honest: &ModelVector, lambda: f64) -> ModelVector {
    honest.scaled(lambda)
}

/// Returns the update and whether this round carried the payload.
pub fn adaptive_update<R: Rng + ?Sized>(
    honest: &ModelVector,
    attack_prob: f64,
    payload_lambda: f64,
    rng: &mut R,
) -> (ModelVector, bool) {
    let attacked = rng.random::<f64>() < attack_prob;
    if attacked {
        (scaling_update(honest, payload_lambda), true)
    } else {
        (honest.clone(), false)
    }
}

/// `mean - z * (std ⊙ direction)`.
pub fn alie_update(pool: &CollusionPool, z: f64, direction: &ModelVector) -> Result<ModelVector> {
    Error::check_dim(pool.mean.dim(), direction.dim())?;
    let values = pool
        .mean
        .iter()
        .zip(pool.std.iter())
        .zip(direction.iter())
        .map(|((m, s), d)| m - z * s * d)
        .collect();
    Ok(ModelVector::from_raw(values))
}

/// `(1 - a) * honest + a * (mean + eps) + gamma_t * direction`, with
/// `eps ~ N(0, diag(std^2))`, optionally clipped.
pub fn sm_update<R: Rng + ?Sized>(
    honest: &ModelVector,
    pool: &CollusionPool,
    spec: &SmSpec,
    t: usize,
    rng: &mut R,
) -> Result<ModelVector> {
    Error::check_dim(honest.dim(), pool.mean.dim())?;
    Error::check_dim(honest.dim(), spec.direction.dim())?;
    let a = spec.mix_alpha;
    let gamma = spec.schedule.gamma(t, pool);
    let values = honest
        .iter()
        .zip(pool.mean.iter())
        .zip(pool.std.iter())
        .zip(spec.direction.iter())
        .map(|(((h, m), s), d)| {
            let eps = if *s > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            } else {
                0.0
            };
            (1.0 - a) * h + a * (m + eps) + gamma * d
        })
        .collect();
    let out = ModelVector::from_raw(values);
    Ok(match spec.clip {
        Some(c) => clip_update(&out, c),
        None => out,
    })
}

/// Dispatches on the client's role. Benign and label-flip clients pass
/// their (already computed) honest update through.
///
/// Returns the update to send and whether it carried an attack this round.
pub fn make_update<R: Rng + ?Sized>(
    client: usize,
    role: Role,
    honest: &ModelVector,
    spec: Option<&AttackSpec>,
    pool: Option<&CollusionPool>,
    t: usize,
    rng: &mut R,
) -> Result<(ModelVector, bool)> {
    // Label flipping already happened in the data, so its update is the
    // trained one.
    if matches!(role, Role::Benign | Role::LabelFlip) {
        return Ok((honest.clone(), role == Role::LabelFlip));
    }
    let spec = match spec {
        Some(s) if s.role() == role => s,
        _ => return Err(Error::UnknownRole(role.name())),
    };
    let solo;
    let pool = match pool {
        Some(p) if p.len() >= 2 => p,
        _ => {
            solo = CollusionPool::solo(client, honest);
            &solo
        }
    };
    match spec {
        AttackSpec::LabelFlip => Ok((honest.clone(), true)),
        AttackSpec::ByzantineGradient { variance } => {
            Ok((byzantine_update(honest.dim(), *variance, rng), true))
        }
        AttackSpec::GradientScaling { lambda } => Ok((scaling_update(honest, *lambda), true)),
        AttackSpec::Adaptive { attack_prob, payload_lambda } => {
            Ok(adaptive_update(honest, *attack_prob, *payload_lambda, rng))
        }
        AttackSpec::Alie { z, direction } => Ok((alie_update(pool, *z, direction)?, true)),
        AttackSpec::StatisticalMimicry(sm) => Ok((sm_update(honest, pool, sm, t, rng)?, true)),
    }
}
