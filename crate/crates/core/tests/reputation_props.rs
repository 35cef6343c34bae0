use flare_core::assessment::AttackPattern;
use flare_core::reputation::{
    anomaly_distance, anomaly_score, composite_score, compute_dynamic_weights, consistency_score, softmax3,
    temporal_score, WeightInputs, VAR_FLOOR,
};
use flare_core::{ClientState, DynamicWeights, ModelVector, Role, VarianceTracker};
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, dim)
}

fn cohort(n: std::ops::Range<usize>, dim: usize) -> impl Strategy<Value = Vec<ModelVector>> {
    prop::collection::vec(vector(dim), n)
        .prop_map(|vs| vs.into_iter().map(|v| ModelVector::new(v).unwrap()).collect())
}

fn pattern() -> impl Strategy<Value = AttackPattern> {
    prop_oneof![
        Just(AttackPattern::None),
        Just(AttackPattern::GradientScaling),
        Just(AttackPattern::AdaptiveAttack),
        Just(AttackPattern::LabelFlipping),
    ]
}

fn weights_for(components: &[[f64; 3]], reps: &[f64], theta: f64, conv: f64, pattern: AttackPattern) -> [f64; 3] {
    let inputs = WeightInputs {
        components,
        prev_reputation: reps,
        prev_threshold: theta,
        conv,
        pattern,
        tau_conv: 0.8,
        smooth: true,
    };
    compute_dynamic_weights(inputs, &DynamicWeights::default()).unwrap().w
}

proptest! {
    #[test]
    fn consistency_stays_in_unit_interval(history in prop::collection::vec(vector(4), 1..12), alpha in 0.0..1.0f64) {
        let mut client = ClientState::new(0, Role::Benign, 10, 10, 20);
        for u in history {
            let u = ModelVector::new(u).unwrap();
            let step = consistency_score(&client, &u, alpha).unwrap();
            prop_assert!((0.0..=1.0).contains(&step.r1));
            prop_assert!((-1.0..=1.0).contains(&step.raw));
            client.raw_consistency = step.raw;
            client.update_ema = Some(step.ema);
        }
    }

    #[test]
    fn anomaly_score_is_monotone_and_bounded(d1 in 0.0..50.0f64, d2 in 0.0..50.0f64, tau in 0.1..5.0f64, lambda in 0.01..2.0f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (s_lo, s_hi) = (anomaly_score(lo, tau, lambda), anomaly_score(hi, tau, lambda));
        prop_assert!(s_hi <= s_lo);
        prop_assert!((0.0..=1.0).contains(&s_lo) && (0.0..=1.0).contains(&s_hi));
    }

    #[test]
    fn anomaly_score_is_continuous_at_tau(tau in 0.1..5.0f64, lambda in 0.01..2.0f64) {
        let eps = 1e-9;
        let left = anomaly_score(tau - eps, tau, lambda);
        let right = anomaly_score(tau + eps, tau, lambda);
        prop_assert!((left - right).abs() < 1e-8);
        prop_assert_eq!(anomaly_score(tau, tau, lambda), 1.0);
    }

    #[test]
    fn distance_is_shift_invariant(updates in cohort(3..9, 5), shift in vector(5), pick in 0usize..8) {
        let shift = ModelVector::new(shift).unwrap();
        let shifted: Vec<ModelVector> = updates.iter().map(|u| u.add(&shift).unwrap()).collect();
        let mut t1 = VarianceTracker::new();
        let mut t2 = VarianceTracker::new();
        let m1 = t1.update(&updates, 0.9).unwrap();
        let m2 = t2.update(&shifted, 0.9).unwrap();
        let i = pick % updates.len();
        let d1 = anomaly_distance(&updates[i], &m1, &t1).unwrap();
        let d2 = anomaly_distance(&shifted[i], &m2, &t2).unwrap();
        prop_assert!((d1 - d2).abs() <= 1e-6 * (1.0 + d1), "{} vs {}", d1, d2);
    }

    #[test]
    fn variance_decay_extremes(first in cohort(2..7, 4), second in cohort(2..7, 4)) {
        let mut frozen = VarianceTracker::new();
        frozen.update(&first, 0.5).unwrap();
        let before = frozen.variance().to_vec();
        frozen.update(&second, 1.0).unwrap();
        prop_assert_eq!(frozen.variance(), before.as_slice());

        let mut fresh = VarianceTracker::new();
        let mean = fresh.update(&second, 0.0).unwrap();
        let n = second.len() as f64;
        for (j, v) in fresh.variance().iter().enumerate() {
            let plain = second.iter().map(|u| (u.as_slice()[j] - mean.as_slice()[j]).powi(2)).sum::<f64>() / n;
            prop_assert!((v - plain).abs() <= 1e-12 * (1.0 + plain));
        }
    }

    #[test]
    fn temporal_score_stays_in_unit_interval(
        seen in prop::collection::vec(any::<bool>(), 0..30),
        times in prop::collection::vec(0.0..100.0f64, 0..40),
        beta in 0.0..=1.0f64,
    ) {
        let mut client = ClientState::new(0, Role::Benign, 10, 10, 20);
        for s in seen {
            client.participation.push(s);
        }
        for t in times {
            client.response_times.push(t);
        }
        let r3 = temporal_score(&client, beta);
        prop_assert!((0.0..=1.0).contains(&r3));
    }

    #[test]
    fn weights_sum_to_one_and_ignore_order(
        rows in prop::collection::vec(([0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64], 0.0..=1.0f64), 1..20),
        theta in 0.1..0.9f64,
        conv in 0.0..=1.0f64,
        pattern in pattern(),
        rotate in 0usize..20,
    ) {
        let components: Vec<[f64; 3]> = rows.iter().map(|(c, _)| *c).collect();
        let reps: Vec<f64> = rows.iter().map(|(_, r)| *r).collect();
        let w = weights_for(&components, &reps, theta, conv, pattern);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|x| *x > 0.0));

        let k = rotate % components.len();
        let (mut c2, mut r2) = (components.clone(), reps.clone());
        c2.rotate_left(k);
        r2.rotate_left(k);
        c2.reverse();
        r2.reverse();
        let w2 = weights_for(&c2, &r2, theta, conv, pattern);
        for (a, b) in w.iter().zip(w2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_ignores_common_offset(eta in [-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64], c in -50.0..50.0f64) {
        let a = softmax3(eta);
        let b = softmax3(eta.map(|x| x + c));
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn composite_is_convex_combination(c in [0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64], eta in [-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64]) {
        let w = softmax3(eta);
        let r = composite_score(&c, &DynamicWeights { w, previous: w });
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r >= lo - 1e-12 && r <= hi + 1e-12);
    }
}

#[test]
fn distance_matches_naive_formula_with_floor() {
    let updates: Vec<ModelVector> = [[1.0, 5.0, 2.0], [1.0, -1.0, 4.0], [1.0, 2.0, 0.0]]
        .iter()
        .map(|v| ModelVector::new(v.to_vec()).unwrap())
        .collect();
    let mut tracker = VarianceTracker::new();
    let mean = tracker.update(&updates, 0.0).unwrap();
    // First coordinate has zero variance, so only the floor keeps it finite.
    let probe = ModelVector::new(vec![1.0 + 1e-5, 0.0, 1.0]).unwrap();
    let naive: f64 = probe
        .iter()
        .zip(mean.iter())
        .zip(tracker.variance())
        .map(|((x, m), v)| (x - m).powi(2) / v.max(VAR_FLOOR))
        .sum::<f64>()
        .sqrt();
    let d = anomaly_distance(&probe, &mean, &tracker).unwrap();
    assert!((d - naive).abs() < 1e-10 * naive.max(1.0));
    assert!(d.is_finite() && d >= 10.0);
}
