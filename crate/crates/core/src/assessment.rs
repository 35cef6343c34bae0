//! Adaptive threshold, client classification, reputation decay/recovery and
//! attack-pattern analysis.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use crate::config::HyperParams;
use crate::error::{Error, Result};
use crate::vector::ModelVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdState {
    pub theta: f64,
    pub anomaly_rate: f64,
    pub conv: f64,
}

impl ThresholdState {
    pub fn initial(hp: &HyperParams) -> Self {
        Self { theta: hp.theta_base, anomaly_rate: 0.0, conv: 0.0 }
    }

    /// Reputation below which a client is excluded.
    pub fn cut(&self) -> f64 {
        self.theta / 2.0
    }
}

/// How much the global model moved, mapped to `[0, 1]` (1 = unchanged).
///
/// `1 / (1 + |w_curr - w_prev| / (|w_prev| + 1e-12))`.
pub fn convergence_metric(w_curr: &ModelVector, w_prev: &ModelVector) -> Result<f64> {
    let change = crate::math::sqrt(w_curr.distance_sq(w_prev)?);
    Ok(1.0 / (1.0 + change / (w_prev.norm() + 1e-12)))
}

/// Fraction of `reputations` strictly below `cut`.
pub fn anomaly_rate(reputations: &[f64], cut: f64) -> f64 {
    if reputations.is_empty() {
        return 0.0;
    }
    reputations.iter().filter(|&&r| r < cut).count() as f64 / reputations.len() as f64
}

pub fn update_threshold(hp: &HyperParams, conv: f64, anomaly_rate: f64) -> ThresholdState {
    let theta = (hp.theta_base + hp.gamma * conv - hp.delta * anomaly_rate)
        .clamp(hp.theta_min, hp.theta_max);
    ThresholdState { theta, anomaly_rate, conv }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    Trusted,
    Suspicious,
    Untrusted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: Class,
    /// Soft-exclusion weight: 1, `R / theta`, or 0.
    pub weight: f64,
}

pub fn classify(reputation: f64, theta: f64) -> Classification {
    if reputation >= theta {
        Classification { class: Class::Trusted, weight: 1.0 }
    } else if reputation >= theta / 2.0 {
        Classification { class: Class::Suspicious, weight: reputation / theta }
    } else {
        Classification { class: Class::Untrusted, weight: 0.0 }
    }
}

/// Residue below which an evolved reputation is snapped onto 0 or 1.
///
/// Repeated decimal steps such as `0.4 - 4 * 0.1` leave about `1e-17` in
/// binary arithmetic; without the snap a client would need one extra
/// participation to reach the floor.
pub const SNAP: f64 = 1e-12;

/// Additive recovery (`+rho_up`, capped at 1) or decay (`-rho_down`, floored at 0).
pub fn evolve_reputation(reputation: f64, behaved_benign: bool, hp: &HyperParams) -> f64 {
    let r = if behaved_benign { reputation + hp.rho_up } else { reputation - hp.rho_down };
    if r < SNAP {
        0.0
    } else if r > 1.0 - SNAP {
        1.0
    } else {
        r
    }
}

/// `gap / step` with quotients within `1e-9` of an integer taken as that integer.
fn steps_quotient(gap: f64, step: f64) -> f64 {
    let q = gap / step;
    let nearest = crate::math::round(q);
    if (q - nearest).abs() < 1e-9 {
        nearest
    } else {
        q
    }
}

/// Prevailing attack signature, as far as detection history can tell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AttackPattern {
    #[default]
    None,
    GradientScaling,
    AdaptiveAttack,
    LabelFlipping,
}

impl AttackPattern {
    pub fn name(self) -> &'static str {
        match self {
            AttackPattern::None => "none",
            AttackPattern::GradientScaling => "gradient_scaling",
            AttackPattern::AdaptiveAttack => "adaptive_attack",
            AttackPattern::LabelFlipping => "label_flipping",
        }
    }
}

/// What the server observed about one participant in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub round: u64,
    pub client: usize,
    /// Composite reputation fell below the exclusion cut.
    pub flagged: bool,
    /// Pre-clipping update norm divided by the cohort median norm.
    pub norm_ratio: f64,
    pub reputation: f64,
    /// Exclusion cut `theta / 2` in force that round.
    pub cut: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Detection records of the most recent rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternHistory {
    rounds: usize,
    records: VecDeque<DetectionRecord>,
}

impl Default for PatternHistory {
    fn default() -> Self {
        Self::new(Self::DEFAULT_ROUNDS)
    }
}

impl PatternHistory {
    pub const DEFAULT_ROUNDS: usize = 20;

    pub fn new(rounds: usize) -> Self {
        Self { rounds, records: VecDeque::new() }
    }

    /// Appends a round and drops records older than the window.
    pub fn push_round(&mut self, round: u64, records: impl IntoIterator<Item = DetectionRecord>) {
        self.records.extend(records);
        let oldest = round.saturating_sub(self.rounds as u64 - 1);
        while self.records.front().is_some_and(|r| r.round < oldest) {
            self.records.pop_front();
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &DetectionRecord> {
        self.records.iter()
    }

    pub fn analyze(&self) -> AttackPattern {
        let records: Vec<DetectionRecord> = self.records.iter().copied().collect();
        analyze_pattern(&records)
    }
}

pub const SCALING_NORM_RATIO: f64 = 3.0;
pub const OSCILLATION_CROSSINGS: usize = 2;
pub const LABEL_FLIP_MAX_R1: f64 = 0.4;
pub const LABEL_FLIP_MIN_R2: f64 = 0.8;

/// Majority vote over clients flagged at least once in `history`.
///
/// A flagged client votes for
/// - gradient scaling if most of its flagged records exceed 3x the median norm,
/// - adaptive attack if its reputation crossed the cut at least twice,
/// - label flipping if most of its flagged records pair low `r1` with high `r2`.
///
/// The first pattern (in that order) backed by a strict majority wins.
pub fn analyze_pattern(history: &[DetectionRecord]) -> AttackPattern {
    let mut per_client: BTreeMap<usize, Vec<&DetectionRecord>> = BTreeMap::new();
    for r in history {
        per_client.entry(r.client).or_default().push(r);
    }
    let mut flagged = 0usize;
    let mut votes = [0usize; 3];
    for records in per_client.values_mut() {
        if !records.iter().any(|r| r.flagged) {
            continue;
        }
        flagged += 1;
        records.sort_by_key(|r| r.round);
        let hits: Vec<&&DetectionRecord> = records.iter().filter(|r| r.flagged).collect();
        let majority = |pred: &dyn Fn(&DetectionRecord) -> bool| {
            2 * hits.iter().filter(|r| pred(r)).count() > hits.len()
        };
        if majority(&|r| r.norm_ratio > SCALING_NORM_RATIO) {
            votes[0] += 1;
        }
        let crossings = records
            .windows(2)
            .filter(|w| (w[0].reputation >= w[0].cut) != (w[1].reputation >= w[1].cut))
            .count();
        if crossings >= OSCILLATION_CROSSINGS {
            votes[1] += 1;
        }
        if majority(&|r| r.r1 < LABEL_FLIP_MAX_R1 && r.r2 >= LABEL_FLIP_MIN_R2) {
            votes[2] += 1;
        }
    }
    if flagged == 0 {
        return AttackPattern::None;
    }
    let patterns = [
        AttackPattern::GradientScaling,
        AttackPattern::AdaptiveAttack,
        AttackPattern::LabelFlipping,
    ];
    patterns
        .into_iter()
        .zip(votes)
        .find(|&(_, v)| 2 * v > flagged)
        .map_or(AttackPattern::None, |(p, _)| p)
}

/// Upper bound on participations before a client flagged every round drops
/// below the largest possible cut `theta_max / 2`.
pub fn participations_to_untrusted(initial: f64, hp: &HyperParams) -> Result<usize> {
    if !(0.0..=1.0).contains(&initial) {
        return Err(Error::InvalidParameter { name: "initial", reason: "must lie in [0, 1]" });
    }
    let gap = initial - hp.theta_max / 2.0;
    if gap < 0.0 {
        return Ok(0);
    }
    // Strictly below the cut: one decrement past the last multiple of rho_down.
    Ok(crate::math::floor(steps_quotient(gap, hp.rho_down)) as usize + 1)
}

/// Upper bound on participations before a client flagged every round hits 0.
pub fn participations_to_zero(initial: f64, hp: &HyperParams) -> usize {
    crate::math::ceil(steps_quotient(initial.clamp(0.0, 1.0), hp.rho_down)) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn v(xs: &[f64]) -> ModelVector {
        ModelVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn convergence_examples() {
        let w = v(&[1.0, 2.0]);
        assert_eq!(convergence_metric(&w, &w).unwrap(), 1.0);
        let prev = v(&[3.0, 4.0]);
        let curr = v(&[6.0, 8.0]);
        assert!((convergence_metric(&curr, &prev).unwrap() - 0.5).abs() < 1e-12);
        assert!(convergence_metric(&v(&[1.0]), &prev).is_err());
    }

    #[test]
    fn threshold_examples() {
        let hp = HyperParams::default();
        assert!((update_threshold(&hp, 0.0, 0.0).theta - 0.5).abs() < 1e-15);
        assert!((update_threshold(&hp, 1.0, 0.0).theta - 0.9).abs() < 1e-15);
        assert_eq!(update_threshold(&hp, 0.0, 1.0).theta, 0.1);
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(0.8, 0.5), Classification { class: Class::Trusted, weight: 1.0 });
        let c = classify(0.3, 0.5);
        assert_eq!(c.class, Class::Suspicious);
        assert!((c.weight - 0.6).abs() < 1e-12);
        assert_eq!(classify(0.2, 0.5), Classification { class: Class::Untrusted, weight: 0.0 });
        assert_eq!(classify(0.25, 0.5).class, Class::Suspicious);
    }

    #[test]
    fn evolution_examples() {
        let hp = HyperParams::default();
        assert!((evolve_reputation(0.5, true, &hp) - 0.55).abs() < 1e-12);
        assert_eq!(evolve_reputation(0.98, true, &hp), 1.0);
        assert_eq!(evolve_reputation(0.10, false, &hp), 0.0);
    }

    #[test]
    fn anomaly_rate_counts_strictly_below() {
        assert_eq!(anomaly_rate(&[0.1, 0.25, 0.3, 0.2], 0.25), 0.5);
        assert_eq!(anomaly_rate(&[], 0.25), 0.0);
    }

    fn rec(client: usize, round: u64, flagged: bool) -> DetectionRecord {
        DetectionRecord {
            round,
            client,
            flagged,
            norm_ratio: 1.0,
            reputation: if flagged { 0.1 } else { 0.8 },
            cut: 0.25,
            r1: 0.9,
            r2: 0.3,
        }
    }

    #[test]
    fn empty_history_has_no_pattern() {
        assert_eq!(analyze_pattern(&[]), AttackPattern::None);
        assert_eq!(analyze_pattern(&[rec(0, 1, false)]), AttackPattern::None);
    }

    #[test]
    fn large_norms_read_as_scaling() {
        let h: Vec<_> = (0..3)
            .map(|c| DetectionRecord { norm_ratio: 10.0, ..rec(c, 1, true) })
            .chain([rec(5, 1, false)])
            .collect();
        assert_eq!(analyze_pattern(&h), AttackPattern::GradientScaling);
    }

    #[test]
    fn low_consistency_high_anomaly_reads_as_label_flip() {
        let h: Vec<_> =
            (0..3).map(|c| DetectionRecord { r1: 0.2, r2: 0.9, ..rec(c, 1, true) }).collect();
        assert_eq!(analyze_pattern(&h), AttackPattern::LabelFlipping);
    }

    #[test]
    fn oscillation_reads_as_adaptive() {
        let h: Vec<_> = (0..2)
            .flat_map(|c| [rec(c, 1, false), rec(c, 2, true), rec(c, 3, false)])
            .collect();
        assert_eq!(analyze_pattern(&h), AttackPattern::AdaptiveAttack);
    }

    #[test]
    fn priority_breaks_ties() {
        let h: Vec<_> = (0..2)
            .flat_map(|c| {
                [
                    rec(c, 1, false),
                    DetectionRecord { norm_ratio: 5.0, ..rec(c, 2, true) },
                    rec(c, 3, false),
                ]
            })
            .collect();
        assert_eq!(analyze_pattern(&h), AttackPattern::GradientScaling);
    }

    #[test]
    fn minority_signal_is_ignored() {
        let h = vec![
            DetectionRecord { norm_ratio: 10.0, ..rec(0, 1, true) },
            rec(1, 1, true),
            rec(2, 1, true),
        ];
        assert_eq!(analyze_pattern(&h), AttackPattern::None);
    }

    #[test]
    fn history_window_prunes_old_rounds() {
        let mut h = PatternHistory::new(20);
        for t in 1..=30 {
            h.push_round(t, [rec(0, t, false)]);
        }
        assert_eq!(h.records().count(), 20);
        assert_eq!(h.records().next().unwrap().round, 11);
    }

    #[test]
    fn ruin_bounds() {
        let hp = HyperParams::default();
        assert_eq!(participations_to_untrusted(0.5, &hp).unwrap(), 1);
        assert_eq!(participations_to_untrusted(1.0, &hp).unwrap(), 4);
        assert_eq!(participations_to_zero(0.5, &hp), 4);
        assert_eq!(participations_to_zero(1.0, &hp), 7);
    }
}
