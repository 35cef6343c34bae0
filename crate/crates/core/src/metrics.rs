//! Detection quality, robustness and convergence speed.

use crate::client::ClientState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, malicious: bool, flagged: bool) {
        match (malicious, flagged) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    /// `tp / (tp + fp)`, or 1 when nothing is flagged.
    pub fn precision(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fp)
    }

    /// `tp / (tp + fn)`, or 1 when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn scores(&self) -> DetectionScores {
        DetectionScores { precision: self.precision(), recall: self.recall(), f1: self.f1() }
    }
}

fn ratio_or_one(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion counts of the Untrusted verdict `R < Θ/2` over all clients.
pub fn confusion(clients: &[ClientState], theta_final: f64) -> ConfusionCounts {
    let cut = theta_final / 2.0;
    let mut c = ConfusionCounts::default();
    for client in clients {
        c.record(client.role.is_malicious(), client.reputation() < cut);
    }
    c
}

pub fn detection_metrics(clients: &[ClientState], theta_final: f64) -> DetectionScores {
    confusion(clients, theta_final).scores()
}

/// Share of rounds whose accuracy is more than 5 points below the clean reference.
pub fn robustness(round_accuracies: &[f64], clean_reference: &[f64]) -> Result<f64> {
    if round_accuracies.len() != clean_reference.len() {
        return Err(Error::LengthMismatch { left: round_accuracies.len(), right: clean_reference.len() });
    }
    if round_accuracies.is_empty() {
        return Ok(0.0);
    }
    // A small slack keeps exactly-5-point gaps on the "not degraded" side
    // despite floating-point noise in the subtraction.
    let degraded = round_accuracies
        .iter()
        .zip(clean_reference)
        .filter(|(a, c)| *c - *a > 0.05 + 1e-12)
        .count();
    Ok(degraded as f64 / round_accuracies.len() as f64)
}

pub const FINAL_WINDOW: usize = 10;

/// Mean of the last [`FINAL_WINDOW`] entries (all of them on shorter curves).
pub fn final_mean(values: &[f64]) -> f64 {
    let tail = &values[values.len().saturating_sub(FINAL_WINDOW)..];
    if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// First 1-based round whose accuracy reaches 90% of the final-window mean.
/// `None` means the target was never reached (only possible on empty input).
pub fn convergence_round(round_accuracies: &[f64]) -> Option<usize> {
    let target = 0.9 * final_mean(round_accuracies);
    round_accuracies.iter().position(|&a| a >= target).map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::Role;
    use alloc::vec::Vec;

    fn counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> ConfusionCounts {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    #[test]
    fn conventions() {
        let s = counts(0, 0, 10, 0).scores();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        assert_eq!(counts(4, 0, 6, 0).f1(), 1.0);
        let s = counts(3, 1, 0, 1).scores();
        assert!((s.precision - 0.75).abs() < 1e-12);
        assert!((s.recall - 0.75).abs() < 1e-12);
        assert!((s.f1 - 0.75).abs() < 1e-12);
        assert_eq!(counts(0, 2, 5, 3).f1(), 0.0);
    }

    #[test]
    fn verdict_from_clients() {
        let mut clients: Vec<ClientState> =
            (0..4).map(|i| ClientState::new(i, if i < 2 { Role::LabelFlip } else { Role::Benign }, 1, 10, 20)).collect();
        clients[0].set_reputation(0.1);
        clients[2].set_reputation(0.2);
        clients[3].set_reputation(0.9);
        let c = confusion(&clients, 0.6);
        assert_eq!(c, counts(1, 1, 1, 1));
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn robustness_examples() {
        let clean = [0.9; 200];
        assert_eq!(robustness(&clean, &clean).unwrap(), 0.0);
        assert_eq!(robustness(&[0.8; 200], &clean).unwrap(), 1.0);
        let mut curve = [0.9; 200];
        curve[..20].iter_mut().for_each(|a| *a = 0.5);
        assert!((robustness(&curve, &clean).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(robustness(&[0.1], &[0.1, 0.2]), Err(Error::LengthMismatch { left: 1, right: 2 }));
    }

    #[test]
    fn convergence_examples() {
        let curve: Vec<f64> = (1..=200).map(|t| if t < 58 { 0.9 * 0.9 * t as f64 / 58.0 } else { 0.9 }).collect();
        // Round 58 is the first at or above 0.9 · 0.9 = 0.81.
        assert_eq!(convergence_round(&curve), Some(58));
        assert_eq!(convergence_round(&[0.7; 30]), Some(1));
        assert_eq!(convergence_round(&[0.0; 30]), Some(1));
        assert_eq!(convergence_round(&[]), None);
    }
}
