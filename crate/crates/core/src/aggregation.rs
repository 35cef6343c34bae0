//! Clipping, local differential privacy and aggregation rules.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math;
use crate::vector::ModelVector;

/// Server-side aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggregatorKind {
    Flare,
    FedAvg,
    /// Classic single-selection Krum tolerating `f` Byzantine updates.
    Krum { f: usize },
    /// Coordinate-wise mean after dropping `floor(trim * n)` values at each end.
    TrimmedMean { trim: f64 },
}

impl AggregatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            AggregatorKind::Flare => "flare",
            AggregatorKind::FedAvg => "fedavg",
            AggregatorKind::Krum { .. } => "krum",
            AggregatorKind::TrimmedMean { .. } => "trimmed_mean",
        }
    }

    /// Checks the cohort-size requirement of the rule.
    pub fn check_cohort(&self, cohort: usize) -> Result<()> {
        match *self {
            AggregatorKind::Krum { f } if cohort < f + 3 => {
                Err(Error::CohortTooSmall { need: f + 3, got: cohort })
            }
            AggregatorKind::TrimmedMean { trim } => {
                if !(0.0..0.5).contains(&trim) {
                    return Err(Error::InvalidParameter {
                        name: "trim_fraction",
                        reason: "must lie in [0, 0.5)",
                    });
                }
                let k = trim_count(trim, cohort);
                if 2 * k >= cohort {
                    Err(Error::CohortTooSmall { need: 2 * k + 1, got: cohort })
                } else {
                    Ok(())
                }
            }
            _ if cohort == 0 => Err(Error::EmptyCohort),
            _ => Ok(()),
        }
    }
}

/// Scales `update` down to L2 norm `c` if it is longer.
pub fn clip_update(update: &ModelVector, c: f64) -> ModelVector {
    let norm = update.norm();
    if norm <= c || norm == 0.0 {
        update.clone()
    } else {
        update.scaled(c / norm)
    }
}

/// Median of the L2 norms; the lower median for an even count.
pub fn median_norm(updates: &[ModelVector]) -> Result<f64> {
    if updates.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let mut norms: Vec<f64> = updates.iter().map(ModelVector::norm).collect();
    norms.sort_by(f64::total_cmp);
    Ok(norms[(norms.len() - 1) / 2])
}

/// Gaussian mechanism: clip to `c_ldp`, then add `N(0, (c_ldp * sigma)^2)` per coordinate.
pub fn apply_ldp<R: Rng + ?Sized>(update: &ModelVector, c_ldp: f64, sigma: f64, rng: &mut R) -> ModelVector {
    let mut out = clip_update(update, c_ldp);
    if sigma > 0.0 {
        let std = c_ldp * sigma;
        for x in out.values_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += std * z;
        }
    }
    out
}

/// One participant's contribution to a FLARE aggregate.
#[derive(Debug, Clone, Copy)]
pub struct WeightedUpdate<'a> {
    pub update: &'a ModelVector,
    pub reputation: f64,
    pub n_samples: usize,
}

/// `w_prev + sum R_i n_i u_i / sum R_i n_i` over the trusted set.
///
/// An empty set, or one whose weights are all zero, leaves the model unchanged.
pub fn flare_aggregate(w_prev: &ModelVector, updates: &[WeightedUpdate<'_>]) -> Result<ModelVector> {
    let mut acc = vec![0.0; w_prev.dim()];
    let mut total = 0.0;
    for u in updates {
        Error::check_dim(w_prev.dim(), u.update.dim())?;
        let w = u.reputation * u.n_samples as f64;
        total += w;
        for (a, x) in acc.iter_mut().zip(u.update.iter()) {
            *a += w * x;
        }
    }
    if updates.is_empty() || total <= 0.0 {
        return Ok(w_prev.clone());
    }
    let out = w_prev
        .iter()
        .zip(&acc)
        .map(|(w, a)| w + a / total)
        .collect();
    Ok(ModelVector::from_raw(out))
}

/// Sample-weighted mean of the deltas added to `w_prev`.
pub fn fedavg_aggregate(w_prev: &ModelVector, updates: &[(&ModelVector, usize)]) -> Result<ModelVector> {
    if updates.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let mut out = w_prev.clone();
    let total: f64 = updates.iter().map(|(_, n)| *n as f64).sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter { name: "n_samples", reason: "total sample count is zero" });
    }
    for (u, n) in updates {
        out.add_scaled(*n as f64 / total, u)?;
    }
    Ok(out)
}

/// Index of the Krum-selected update: minimal sum of squared distances to
/// its `n - f - 2` nearest neighbours. Ties go to the lowest index.
pub fn krum_select(updates: &[ModelVector], f: usize) -> Result<usize> {
    let n = updates.len();
    if n < f + 3 {
        return Err(Error::CohortTooSmall { need: f + 3, got: n });
    }
    let dim = updates[0].dim();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        Error::check_dim(dim, updates[i].dim())?;
        for j in (i + 1)..n {
            let d = updates[i].distance_sq(&updates[j])?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let neighbours = n - f - 2;
    let mut best = (f64::INFINITY, 0usize);
    let mut row = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| dist[i * n + j]));
        row.sort_by(f64::total_cmp);
        let score: f64 = row[..neighbours].iter().sum();
        if score < best.0 {
            best = (score, i);
        }
    }
    Ok(best.1)
}

pub fn krum_aggregate(w_prev: &ModelVector, updates: &[ModelVector], f: usize) -> Result<(ModelVector, usize)> {
    let idx = krum_select(updates, f)?;
    Ok((w_prev.add(&updates[idx])?, idx))
}

fn trim_count(trim: f64, n: usize) -> usize {
    math::floor(trim * n as f64) as usize
}

/// Coordinate-wise trimmed mean of the deltas added to `w_prev`.
pub fn trimmed_mean_aggregate(w_prev: &ModelVector, updates: &[ModelVector], trim: f64) -> Result<ModelVector> {
    let n = updates.len();
    if n == 0 {
        return Err(Error::EmptyCohort);
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::InvalidParameter { name: "trim_fraction", reason: "must lie in [0, 0.5)" });
    }
    let k = trim_count(trim, n);
    if 2 * k >= n {
        return Err(Error::CohortTooSmall { need: 2 * k + 1, got: n });
    }
    let dim = w_prev.dim();
    for u in updates {
        Error::check_dim(dim, u.dim())?;
    }
    let mut column = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(dim);
    for p in 0..dim {
        column.clear();
        column.extend(updates.iter().map(|u| u[p]));
        column.sort_by(f64::total_cmp);
        let kept = &column[k..n - k];
        out.push(w_prev[p] + kept.iter().sum::<f64>() / kept.len() as f64);
    }
    Ok(ModelVector::from_raw(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn v(xs: &[f64]) -> ModelVector {
        ModelVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn clip_examples() {
        let short = v(&[0.3, 0.4]);
        assert_eq!(clip_update(&short, 1.0), short);
        let long = v(&[0.0, 2.0]);
        let c = clip_update(&long, 1.0);
        assert!((c.norm() - 1.0).abs() < 1e-15);
        assert_eq!(c[0], 0.0);
        assert_eq!(clip_update(&v(&[3.0, 4.0]), 10.0), v(&[3.0, 4.0]));
        assert_eq!(clip_update(&v(&[0.0, 0.0]), 1.0), v(&[0.0, 0.0]));
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_norm(&[v(&[1.0]), v(&[2.0]), v(&[3.0])]).unwrap(), 2.0);
        assert_eq!(median_norm(&[v(&[1.0]), v(&[100.0]), v(&[3.0]), v(&[2.0])]).unwrap(), 2.0);
        assert_eq!(median_norm(&[v(&[0.0, 7.0])]).unwrap(), 7.0);
        assert_eq!(median_norm(&[]), Err(Error::EmptyCohort));
    }

    #[test]
    fn noiseless_ldp_is_clip() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let u = v(&[3.0, 4.0]);
        assert_eq!(apply_ldp(&u, 1.0, 0.0, &mut rng), clip_update(&u, 1.0));
    }

    #[test]
    fn flare_examples() {
        let w0 = v(&[1.0, -1.0]);
        let a = v(&[0.5, 2.0]);
        let single = [WeightedUpdate { update: &a, reputation: 0.3, n_samples: 7 }];
        assert_eq!(flare_aggregate(&w0, &single).unwrap(), v(&[1.5, 1.0]));

        let e1 = v(&[1.0, 0.0]);
        let e2 = v(&[0.0, 1.0]);
        let pair = [
            WeightedUpdate { update: &e1, reputation: 0.6, n_samples: 10 },
            WeightedUpdate { update: &e2, reputation: 0.6, n_samples: 10 },
        ];
        let out = flare_aggregate(&w0, &pair).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-15 && (out[1] + 0.5).abs() < 1e-15);

        let w0 = v(&[0.0]);
        let plus = v(&[1.0]);
        let minus = v(&[-1.0]);
        let skew = [
            WeightedUpdate { update: &plus, reputation: 0.8, n_samples: 100 },
            WeightedUpdate { update: &minus, reputation: 0.2, n_samples: 100 },
        ];
        assert!((flare_aggregate(&w0, &skew).unwrap()[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn empty_trusted_set_stalls() {
        let w0 = v(&[1.0, 2.0]);
        assert_eq!(flare_aggregate(&w0, &[]).unwrap(), w0);
    }

    #[test]
    fn fedavg_examples() {
        let w0 = v(&[0.0]);
        let a = v(&[4.0]);
        let b = v(&[0.0]);
        assert!((fedavg_aggregate(&w0, &[(&a, 3), (&b, 1)]).unwrap()[0] - 3.0).abs() < 1e-12);
        assert!((fedavg_aggregate(&w0, &[(&a, 5), (&b, 5)]).unwrap()[0] - 2.0).abs() < 1e-12);
        assert_eq!(fedavg_aggregate(&v(&[1.0]), &[(&a, 2)]).unwrap(), v(&[5.0]));
        assert_eq!(fedavg_aggregate(&w0, &[]), Err(Error::EmptyCohort));
    }

    #[test]
    fn krum_examples() {
        let pts = [v(&[0.0]), v(&[0.1]), v(&[-0.1]), v(&[10.0])];
        assert_eq!(krum_select(&pts, 1).unwrap(), 0);
        let same = [v(&[1.0, 1.0]), v(&[1.0, 1.0]), v(&[1.0, 1.0]), v(&[1.0, 1.0])];
        assert_eq!(krum_select(&same, 1).unwrap(), 0);
        assert!(matches!(krum_select(&pts[..3], 1), Err(Error::CohortTooSmall { need: 4, got: 3 })));
    }

    #[test]
    fn krum_selected_vector_is_permutation_invariant() {
        let pts = [v(&[0.3, 1.0]), v(&[0.2, 0.9]), v(&[5.0, -4.0]), v(&[0.25, 1.1]), v(&[0.1, 0.8])];
        let chosen = &pts[krum_select(&pts, 1).unwrap()];
        let rev: Vec<_> = pts.iter().rev().cloned().collect();
        assert_eq!(&rev[krum_select(&rev, 1).unwrap()], chosen);
    }

    #[test]
    fn trimmed_mean_examples() {
        let w0 = v(&[0.0]);
        let vals = [v(&[1.0]), v(&[2.0]), v(&[3.0]), v(&[100.0])];
        assert!((trimmed_mean_aggregate(&w0, &vals, 0.25).unwrap()[0] - 2.5).abs() < 1e-12);
        let plain = trimmed_mean_aggregate(&w0, &vals, 0.0).unwrap()[0];
        assert!((plain - 26.5).abs() < 1e-12);
        let flat = [v(&[4.0]), v(&[4.0]), v(&[4.0])];
        assert_eq!(trimmed_mean_aggregate(&w0, &flat, 0.3).unwrap(), v(&[4.0]));
        assert!(trimmed_mean_aggregate(&w0, &vals[..1], 0.0).is_ok());
        assert!(trimmed_mean_aggregate(&w0, &vals[..2], 0.49).is_ok());
        assert!(trimmed_mean_aggregate(&w0, &vals, 0.5).is_err());
    }

    #[test]
    fn cohort_requirements() {
        assert!(AggregatorKind::Krum { f: 2 }.check_cohort(4).is_err());
        assert!(AggregatorKind::Krum { f: 2 }.check_cohort(5).is_ok());
        assert!(AggregatorKind::TrimmedMean { trim: 0.25 }.check_cohort(4).is_ok());
        assert!(AggregatorKind::TrimmedMean { trim: 0.5 }.check_cohort(5).is_err());
        assert!(AggregatorKind::FedAvg.check_cohort(0).is_err());
    }
}
