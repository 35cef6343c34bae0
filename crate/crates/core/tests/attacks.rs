//! Attack behaviour on the synthetic task, measured against the defense's own statistics.

use flare_core::adversary::{alie_update, sm_update, SmSchedule, SmSpec};
use flare_core::aggregation::fedavg_aggregate;
use flare_core::reputation::anomaly_distance;
use flare_core::simenv::{generate_federation, local_train, TaskConfig};
use flare_core::{CollusionPool, HyperParams, ModelVector, Purpose, RngStream, VarianceTracker};
use rand::seq::index::sample;

struct Stealth {
    raw: f64,
    per_coordinate: f64,
}

/// Fraction of rounds in which the SM update's standardized distance stays
/// below `tau_d`, under FedAvg with two SM clients in every cohort of ten.
fn sm_stealth(seed: u64, rounds: usize) -> Stealth {
    let hp = HyperParams::default();
    let rng = RngStream::new(seed);
    let cfg = TaskConfig { n_clients: 50, ..TaskConfig::default() };
    let mut task = generate_federation(&cfg, &rng).unwrap();
    let direction = task.fit_reference(100, 0.05).scaled(-1.0).normalized().unwrap();
    let spec = SmSpec { mix_alpha: 0.3, schedule: SmSchedule::RelativeToNorm { fraction: 0.05 }, direction, clip: None };
    let dim = task.dim();
    let sqrt_d = (dim as f64).sqrt();

    let mut model = ModelVector::zeros(dim);
    let mut tracker = VarianceTracker::new();
    let (mut below_raw, mut below_pc, mut total) = (0usize, 0usize, 0usize);
    for t in 1..=rounds {
        let mut sel = rng.substream(Purpose::Selection, u64::MAX, t as u64);
        let cohort = sample(&mut sel, cfg.n_clients, hp.cohort_size).into_vec();
        let honest: Vec<ModelVector> = cohort
            .iter()
            .map(|&id| {
                let mut r = rng.substream(Purpose::Training, id as u64, t as u64);
                local_train(&model, &task.clients[id], &hp, false, &mut r).unwrap()
            })
            .collect();
        // The first two cohort members collude.
        let pool = CollusionPool::from_members(cohort[..2].to_vec(), &honest[..2]).unwrap();
        let mut sent = honest.clone();
        for k in 0..2 {
            let mut r = rng.substream(Purpose::Attack, cohort[k] as u64, t as u64);
            sent[k] = sm_update(&honest[k], &pool, &spec, t, &mut r).unwrap();
        }
        let mean = tracker.update(&sent, hp.alpha_cov).unwrap();
        for u in &sent[..2] {
            let d = anomaly_distance(u, &mean, &tracker).unwrap();
            below_raw += usize::from(d < hp.tau_d);
            below_pc += usize::from(d / sqrt_d < hp.tau_d);
            total += 1;
        }
        let parts: Vec<(&ModelVector, usize)> = sent.iter().map(|u| (u, 50)).collect();
        model = fedavg_aggregate(&model, &parts).unwrap();
    }
    Stealth { raw: below_raw as f64 / total as f64, per_coordinate: below_pc as f64 / total as f64 }
}

#[test]
fn sm_updates_look_like_the_cohort() {
    for seed in [0, 1, 2] {
        let s = sm_stealth(seed, 100);
        // On the root-mean-square scale the SM update is inside the threshold
        // nearly always. The unscaled distance of a 210-dimensional vector is
        // about sqrt(210) for honest and SM updates alike, so it says nothing
        // about stealth and no bound is asserted on it.
        assert!(s.per_coordinate >= 0.8, "seed {seed}: below tau_d in {:.2} of rounds", s.per_coordinate);
        assert!(s.raw <= s.per_coordinate);
    }
}

#[test]
fn alie_is_plausible_per_coordinate() {
    let rng = RngStream::new(4);
    let task = generate_federation(&TaskConfig { n_clients: 10, ..TaskConfig::default() }, &rng).unwrap();
    let hp = HyperParams::default();
    let model = ModelVector::zeros(task.dim());
    let honest: Vec<ModelVector> = (0..5)
        .map(|id| {
            let mut r = rng.substream(Purpose::Training, id, 1);
            local_train(&model, &task.clients[id as usize], &hp, false, &mut r).unwrap()
        })
        .collect();
    let pool = CollusionPool::from_members((0..5).collect(), &honest).unwrap();
    let mut direction = vec![0.0; task.dim()];
    direction.iter_mut().enumerate().for_each(|(j, x)| *x = if j % 2 == 0 { 1.0 } else { -1.0 });
    let direction = ModelVector::new(direction).unwrap().normalized().unwrap();
    for z in [0.5, 1.0, 2.0] {
        let u = alie_update(&pool, z, &direction).unwrap();
        for ((x, m), s) in u.iter().zip(pool.mean.iter()).zip(pool.std.iter()) {
            assert!((x - m).abs() <= 2.0 * s + 1e-12);
        }
    }
}
