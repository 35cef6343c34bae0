//! Synthetic federated task: 10-class multinomial logistic regression on
//! Gaussian class clusters, Dirichlet label skew across clients, local SGD,
//! response-time simulation and cohort selection.
//!
//! A model is a `10 × (p + 1)` weight matrix stored row-major in a
//! [`ModelVector`]; row `k` holds the `p` feature weights of class `k`
//! followed by its bias.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Dirichlet, Distribution, LogNormal, Normal};

use crate::client::{ClientState, Role};
use crate::config::HyperParams;
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{Purpose, RngStream, SERVER};
use crate::vector::ModelVector;

pub const CLASSES: usize = 10;

/// Selection weight floor: every client keeps a nonzero chance of being picked.
pub const SELECTION_FLOOR: f64 = 0.05;

/// Log-normal shape of response times.
pub const BENIGN_RESPONSE_SIGMA: f64 = 0.1;
pub const ERRATIC_RESPONSE_SIGMA: f64 = 0.6;

pub fn model_dim(p: usize) -> usize {
    CLASSES * (p + 1)
}

/// Labelled samples; `features` is row-major `len × p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub p: usize,
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn class_histogram(&self) -> [usize; CLASSES] {
        let mut h = [0; CLASSES];
        for &y in &self.labels {
            h[y as usize] += 1;
        }
        h
    }
}

/// Knobs of the synthetic data generator.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub n_clients: usize,
    pub samples_per_client: usize,
    pub dirichlet_alpha: f64,
    pub p: usize,
    /// Class `k` is centred at `center_scale · e_k`.
    pub center_scale: f64,
    pub noise_std: f64,
    /// Balanced held-out set size (rounded down to a multiple of 10).
    pub test_samples: usize,
    /// Probability that a training label is replaced by a uniformly drawn other class.
    pub label_noise: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            n_clients: 100,
            samples_per_client: 50,
            dirichlet_alpha: 0.5,
            p: 20,
            center_scale: 4.0,
            noise_std: 1.0,
            test_samples: 1000,
            label_noise: 0.0,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if self.n_clients == 0 {
            return bad("n_clients", "must be >= 1");
        }
        if self.samples_per_client == 0 {
            return bad("samples_per_client", "must be >= 1");
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return bad("dirichlet_alpha", "must be finite and > 0");
        }
        if self.p < CLASSES {
            return bad("p", "must be >= 10 so class centres are orthogonal");
        }
        if self.center_scale * core::f64::consts::SQRT_2 < 2.0 {
            return bad("center_scale", "class centres must be at least 2 apart");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std", "must be finite and >= 0");
        }
        if self.test_samples < CLASSES {
            return bad("test_samples", "must be >= 10");
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad("label_noise", "must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub p: usize,
    pub centers: Vec<Vec<f64>>,
    pub clients: Vec<Dataset>,
    pub test: Dataset,
    pub label_noise: f64,
    /// Centrally trained model and its test loss `L*`, once fitted.
    pub reference: Option<ModelVector>,
    pub reference_loss: Option<f64>,
}

impl SyntheticTask {
    pub fn dim(&self) -> usize {
        model_dim(self.p)
    }

    /// All client training data concatenated (clean labels).
    pub fn pooled(&self) -> Dataset {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for c in &self.clients {
            features.extend_from_slice(&c.features);
            labels.extend_from_slice(&c.labels);
        }
        Dataset { p: self.p, features, labels }
    }

    /// Fits the centralized reference with full-batch gradient descent and
    /// stores it together with its test loss.
    pub fn fit_reference(&mut self, iterations: usize, learning_rate: f64) -> &ModelVector {
        let pooled = self.pooled();
        let mut w = vec![0.0; self.dim()];
        for _ in 0..iterations {
            gradient_step(&mut w, &pooled, 0..pooled.len(), learning_rate, false, &mut vec![0.0; self.dim()]);
        }
        let model = ModelVector::from_raw(w);
        self.reference_loss = Some(evaluate(&model, &self.test).0);
        self.reference.insert(model)
    }
}

fn sample_point<R: Rng + ?Sized>(center: &[f64], noise: &Normal<f64>, out: &mut Vec<f64>, rng: &mut R) {
    out.extend(center.iter().map(|c| c + noise.sample(rng)));
}

/// Builds the federation. Each client draws class proportions from
/// `Dirichlet(α·1)` and then `samples_per_client` labels from them.
pub fn generate_federation(cfg: &TaskConfig, rng: &RngStream) -> Result<SyntheticTask> {
    cfg.validate()?;
    let p = cfg.p;
    let centers: Vec<Vec<f64>> = (0..CLASSES)
        .map(|k| (0..p).map(|j| if j == k { cfg.center_scale } else { 0.0 }).collect())
        .collect();
    let noise = Normal::new(0.0, cfg.noise_std)
        .map_err(|_| Error::InvalidParameter { name: "noise_std", reason: "invalid normal" })?;
    let dirichlet = Dirichlet::new([cfg.dirichlet_alpha; CLASSES])
        .map_err(|_| Error::InvalidParameter { name: "dirichlet_alpha", reason: "invalid Dirichlet" })?;

    let mut clients = Vec::with_capacity(cfg.n_clients);
    for i in 0..cfg.n_clients {
        let mut r = rng.substream(Purpose::Data, i as u64, 0);
        let props: [f64; CLASSES] = dirichlet.sample(&mut r);
        // Extremely small alphas can underflow every share to zero.
        let labels_dist = WeightedIndex::new(props.iter().copied())
            .unwrap_or_else(|_| WeightedIndex::new([1.0; CLASSES]).expect("uniform weights"));
        let mut features = Vec::with_capacity(cfg.samples_per_client * p);
        let mut labels = Vec::with_capacity(cfg.samples_per_client);
        for _ in 0..cfg.samples_per_client {
            let y = labels_dist.sample(&mut r);
            sample_point(&centers[y], &noise, &mut features, &mut r);
            let y = if cfg.label_noise > 0.0 && r.random::<f64>() < cfg.label_noise {
                (y + r.random_range(1..CLASSES)) % CLASSES
            } else {
                y
            };
            labels.push(y as u8);
        }
        clients.push(Dataset { p, features, labels });
    }

    let per_class = cfg.test_samples / CLASSES;
    let mut r = rng.substream(Purpose::TestData, SERVER, 0);
    let mut features = Vec::with_capacity(per_class * CLASSES * p);
    let mut labels = Vec::with_capacity(per_class * CLASSES);
    for (k, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            sample_point(center, &noise, &mut features, &mut r);
            labels.push(k as u8);
        }
    }

    Ok(SyntheticTask {
        p,
        centers,
        clients,
        test: Dataset { p, features, labels },
        label_noise: cfg.label_noise,
        reference: None,
        reference_loss: None,
    })
}

pub fn flip_label(y: u8) -> u8 {
    ((y as usize + 1) % CLASSES) as u8
}

fn logits(w: &[f64], x: &[f64], out: &mut [f64; CLASSES]) {
    let stride = x.len() + 1;
    for (k, z) in out.iter_mut().enumerate() {
        let row = &w[k * stride..(k + 1) * stride];
        *z = row[x.len()] + x.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Turns logits into probabilities in place and returns `log Σ exp(z)`.
fn softmax(z: &mut [f64; CLASSES]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    max + math::ln(sum)
}

/// One averaged cross-entropy gradient step over `batch` (indices into `data`).
fn gradient_step(
    w: &mut [f64],
    data: &Dataset,
    batch: impl Iterator<Item = usize>,
    lr: f64,
    flip: bool,
    grad: &mut [f64],
) {
    let p = data.p;
    let stride = p + 1;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut count = 0usize;
    let mut z = [0.0; CLASSES];
    for i in batch {
        let x = data.row(i);
        let y = if flip { flip_label(data.labels[i]) } else { data.labels[i] } as usize;
        logits(w, x, &mut z);
        softmax(&mut z);
        z[y] -= 1.0;
        for (k, &e) in z.iter().enumerate() {
            let g = &mut grad[k * stride..(k + 1) * stride];
            for (gj, xj) in g.iter_mut().zip(x) {
                *gj += e * xj;
            }
            g[p] += e;
        }
        count += 1;
    }
    if count == 0 {
        return;
    }
    let step = lr / count as f64;
    for (wj, gj) in w.iter_mut().zip(grad.iter()) {
        *wj -= step * gj;
    }
}

/// Runs `E` epochs of shuffled mini-batch SGD from `global` and returns the
/// delta `w_local − w_global`. A batch size at least the dataset size gives
/// full-batch gradient descent with no shuffling.
pub fn local_train<R: Rng + ?Sized>(
    global: &ModelVector,
    data: &Dataset,
    hp: &HyperParams,
    flip_labels: bool,
    rng: &mut R,
) -> Result<ModelVector> {
    Error::check_dim(model_dim(data.p), global.dim())?;
    if data.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let mut w = global.as_slice().to_vec();
    let mut grad = vec![0.0; w.len()];
    let n = data.len();
    let bs = hp.batch_size.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..hp.local_epochs {
        if bs >= n {
            gradient_step(&mut w, data, 0..n, hp.learning_rate, flip_labels, &mut grad);
            continue;
        }
        order.shuffle(rng);
        for chunk in order.chunks(bs) {
            gradient_step(&mut w, data, chunk.iter().copied(), hp.learning_rate, flip_labels, &mut grad);
        }
    }
    for (wl, wg) in w.iter_mut().zip(global.iter()) {
        *wl -= wg;
    }
    ModelVector::new(w)
}

/// Mean cross-entropy and top-1 accuracy of `model` on `data`.
pub fn evaluate(model: &ModelVector, data: &Dataset) -> (f64, f64) {
    evaluate_labels(model, data, false)
}

/// As [`evaluate`], optionally scoring against flipped labels.
pub fn evaluate_labels(model: &ModelVector, data: &Dataset, flip: bool) -> (f64, f64) {
    if data.is_empty() {
        return (0.0, 0.0);
    }
    let w = model.as_slice();
    let mut z = [0.0; CLASSES];
    let mut loss = 0.0;
    let mut correct = 0usize;
    for i in 0..data.len() {
        let y = if flip { flip_label(data.labels[i]) } else { data.labels[i] } as usize;
        logits(w, data.row(i), &mut z);
        // Ties resolve to the lowest class so the zero model predicts class 0.
        let pred = (1..CLASSES).fold(0, |best, k| if z[k] > z[best] { k } else { best });
        if pred == y {
            correct += 1;
        }
        let lse = softmax_lse(&z);
        loss += lse - z[y];
    }
    let n = data.len() as f64;
    (loss / n, correct as f64 / n)
}

fn softmax_lse(z: &[f64; CLASSES]) -> f64 {
    let mut copy = *z;
    softmax(&mut copy)
}

/// Per-client response-time generator: `ln RT ~ N(mu, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseProfile {
    pub mu: f64,
    pub sigma: f64,
}

impl ResponseProfile {
    /// Location drawn uniformly in `[-0.5, 0.5]`; adaptive attackers get the erratic shape.
    pub fn for_client(id: usize, role: Role, rng: &RngStream) -> Self {
        let mut r = rng.substream(Purpose::Profile, id as u64, 0);
        let mu = r.random_range(-0.5..=0.5);
        let sigma = if role == Role::Adaptive { ERRATIC_RESPONSE_SIGMA } else { BENIGN_RESPONSE_SIGMA };
        Self { mu, sigma }
    }
}

/// Draws a response time and appends it to the client's window.
pub fn simulate_response<R: Rng + ?Sized>(client: &mut ClientState, profile: &ResponseProfile, rng: &mut R) -> f64 {
    let t = LogNormal::new(profile.mu, profile.sigma)
        .map(|d| d.sample(rng))
        .unwrap_or_else(|_| math::exp(profile.mu));
    client.response_times.push(t);
    t
}

/// Draws `size` distinct indices with probability proportional to
/// `max(weights[i], floor)`, one at a time without replacement. The result is
/// sorted ascending.
pub fn select_weighted<R: Rng + ?Sized>(weights: &[f64], floor: f64, size: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = weights.len();
    if size > n {
        return Err(Error::CohortTooLarge { size, available: n });
    }
    if size == 0 {
        return Ok(Vec::new());
    }
    let w: Vec<f64> = weights.iter().map(|&r| if r.is_nan() { floor } else { r.max(floor) }).collect();
    let mut dist = WeightedIndex::new(&w)
        .map_err(|_| Error::InvalidParameter { name: "weights", reason: "selection weights must be positive" })?;
    let mut picked = Vec::with_capacity(size);
    for k in 0..size {
        let i = dist.sample(rng);
        picked.push(i);
        if k + 1 < size {
            dist.update_weights(&[(i, &0.0)])
                .map_err(|_| Error::InvalidParameter { name: "weights", reason: "selection weights must be positive" })?;
        }
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Reputation-proportional cohort selection with the [`SELECTION_FLOOR`].
pub fn select_cohort<R: Rng + ?Sized>(clients: &[ClientState], size: usize, rng: &mut R) -> Result<Vec<usize>> {
    let reps: Vec<f64> = clients.iter().map(ClientState::reputation).collect();
    select_weighted(&reps, SELECTION_FLOOR, size, rng)
}

/// Uniform cohort selection (equal weights through the same sampler).
pub fn select_uniform<R: Rng + ?Sized>(n_clients: usize, size: usize, rng: &mut R) -> Result<Vec<usize>> {
    select_weighted(&vec![1.0; n_clients], SELECTION_FLOOR, size, rng)
}

/// Shannon entropy (nats) of a class histogram.
pub fn label_entropy(hist: &[usize; CLASSES]) -> f64 {
    let total: usize = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / total as f64;
            -q * math::ln(q)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(alpha: f64) -> TaskConfig {
        TaskConfig { n_clients: 100, samples_per_client: 50, dirichlet_alpha: alpha, ..TaskConfig::default() }
    }

    #[test]
    fn replay_is_identical() {
        let a = generate_federation(&small(0.5), &RngStream::new(9)).unwrap();
        let b = generate_federation(&small(0.5), &RngStream::new(9)).unwrap();
        assert_eq!(a, b);
        let c = generate_federation(&small(0.5), &RngStream::new(10)).unwrap();
        assert_ne!(a.clients[0], c.clients[0]);
    }

    #[test]
    fn centers_are_separated() {
        let t = generate_federation(&small(0.5), &RngStream::new(0)).unwrap();
        for i in 0..CLASSES {
            for j in (i + 1)..CLASSES {
                let d: f64 = t.centers[i].iter().zip(&t.centers[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                assert!(math::sqrt(d) >= 2.0);
            }
        }
        assert_eq!(t.test.class_histogram(), [100; CLASSES]);
    }

    #[test]
    fn skewed_alpha_concentrates_labels() {
        let t = generate_federation(&small(0.1), &RngStream::new(1)).unwrap();
        let share: f64 = t
            .clients
            .iter()
            .map(|c| *c.class_histogram().iter().max().unwrap() as f64 / c.len() as f64)
            .sum::<f64>()
            / t.clients.len() as f64;
        assert!(share > 0.5, "mean max share {share}");
    }

    #[test]
    fn huge_alpha_is_iid() {
        let cfg = TaskConfig { samples_per_client: 1000, n_clients: 10, dirichlet_alpha: 1e6, ..TaskConfig::default() };
        let t = generate_federation(&cfg, &RngStream::new(2)).unwrap();
        // Multinomial count per class: mean 100, std sqrt(1000 · 0.1 · 0.9).
        let sd = math::sqrt(90.0);
        for c in &t.clients {
            for &h in &c.class_histogram() {
                assert!((h as f64 - 100.0).abs() <= 3.0 * sd + 1.0, "count {h}");
            }
        }
    }

    #[test]
    fn entropy_grows_with_alpha() {
        let mut prev = -1.0;
        for alpha in [0.1, 0.3, 0.5, 0.7] {
            let t = generate_federation(&small(alpha), &RngStream::new(3)).unwrap();
            let h = t.clients.iter().map(|c| label_entropy(&c.class_histogram())).sum::<f64>() / 100.0;
            assert!(h > prev, "alpha {alpha}: {h} <= {prev}");
            prev = h;
        }
    }

    #[test]
    fn zero_model_is_chance() {
        let t = generate_federation(&small(0.5), &RngStream::new(4)).unwrap();
        let (loss, acc) = evaluate(&ModelVector::zeros(t.dim()), &t.test);
        assert!((acc - 0.1).abs() <= 0.02);
        assert!((loss - math::ln(10.0)).abs() < 1e-12);
    }

    #[test]
    fn reference_fits_well() {
        let mut t = generate_federation(&small(0.5), &RngStream::new(5)).unwrap();
        let w = t.fit_reference(300, 0.05).clone();
        let (loss, acc) = evaluate(&w, &t.test);
        assert!(acc >= 0.9, "reference accuracy {acc}");
        assert_eq!(t.reference_loss, Some(loss));
    }

    #[test]
    fn no_epochs_no_delta() {
        let t = generate_federation(&small(0.5), &RngStream::new(6)).unwrap();
        let hp = HyperParams { local_epochs: 0, ..HyperParams::default() };
        let mut r = RngStream::new(0).substream(Purpose::Training, 0, 1);
        let delta = local_train(&ModelVector::zeros(t.dim()), &t.clients[0], &hp, false, &mut r).unwrap();
        assert_eq!(delta, ModelVector::zeros(t.dim()));
    }

    #[test]
    fn full_batch_loss_is_monotone() {
        let t = generate_federation(&small(0.5), &RngStream::new(7)).unwrap();
        let data = &t.clients[3];
        let hp = HyperParams { local_epochs: 1, batch_size: 10_000, learning_rate: 0.01, ..HyperParams::default() };
        let mut w = ModelVector::zeros(t.dim());
        let mut prev = evaluate(&w, data).0;
        let mut r = RngStream::new(0).substream(Purpose::Training, 3, 1);
        for _ in 0..20 {
            let delta = local_train(&w, data, &hp, false, &mut r).unwrap();
            w = w.add(&delta).unwrap();
            let loss = evaluate(&w, data).0;
            assert!(loss <= prev + 1e-12);
            prev = loss;
        }
    }

    #[test]
    fn flipped_training_learns_wrong_labels() {
        let cfg = TaskConfig { n_clients: 1, samples_per_client: 200, ..TaskConfig::default() };
        let t = generate_federation(&cfg, &RngStream::new(8)).unwrap();
        let hp = HyperParams { learning_rate: 0.01, ..HyperParams::default() };
        let mut w = ModelVector::zeros(t.dim());
        for round in 1..=50u64 {
            let mut r = RngStream::new(8).substream(Purpose::Training, 0, round);
            w = w.add(&local_train(&w, &t.clients[0], &hp, true, &mut r).unwrap()).unwrap();
        }
        let (_, acc) = evaluate(&w, &t.clients[0]);
        assert!(acc < 0.2, "accuracy on original labels {acc}");
        assert!(evaluate_labels(&w, &t.clients[0], true).1 > 0.8);
    }

    #[test]
    fn local_train_replays() {
        let t = generate_federation(&small(0.5), &RngStream::new(6)).unwrap();
        let hp = HyperParams::default();
        let run = || {
            let mut r = RngStream::new(1).substream(Purpose::Training, 2, 7);
            local_train(&ModelVector::zeros(t.dim()), &t.clients[2], &hp, false, &mut r).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn degenerate_response_profile_is_constant() {
        let mut c = ClientState::new(0, Role::Benign, 10, 10, 20);
        let prof = ResponseProfile { mu: 0.3, sigma: 0.0 };
        let mut r = RngStream::new(0).substream(Purpose::Response, 0, 1);
        for _ in 0..5 {
            simulate_response(&mut c, &prof, &mut r);
        }
        assert_eq!(crate::reputation::response_time_std(&c), 0.0);
    }

    #[test]
    fn erratic_timing_has_larger_spread() {
        let rng = RngStream::new(11);
        let mut wins = 0;
        for seed in 0..100u64 {
            let mut benign = ClientState::new(0, Role::Benign, 10, 10, 20);
            let mut erratic = ClientState::new(1, Role::Adaptive, 10, 10, 20);
            let pb = ResponseProfile { mu: 0.0, sigma: BENIGN_RESPONSE_SIGMA };
            let pe = ResponseProfile { mu: 0.0, sigma: ERRATIC_RESPONSE_SIGMA };
            let mut r = rng.substream(Purpose::Response, seed, 0);
            for _ in 0..20 {
                simulate_response(&mut benign, &pb, &mut r);
                simulate_response(&mut erratic, &pe, &mut r);
            }
            if crate::reputation::response_time_std(&benign) < crate::reputation::response_time_std(&erratic) {
                wins += 1;
            }
        }
        assert!(wins >= 95);
    }

    #[test]
    fn uniform_selection_frequencies() {
        let mut counts = [0usize; 10];
        let mut r = RngStream::new(12).substream(Purpose::Selection, SERVER, 0);
        let draws = 10_000;
        for _ in 0..draws {
            for i in select_uniform(10, 3, &mut r).unwrap() {
                counts[i] += 1;
            }
        }
        // Each client is included with probability 0.3.
        let sd = math::sqrt(draws as f64 * 0.3 * 0.7);
        for &c in &counts {
            assert!((c as f64 - 3000.0).abs() <= 3.0 * sd, "count {c}");
        }
    }

    #[test]
    fn floored_selection_share() {
        let mut weights = vec![0.0; 10];
        weights[0] = 1.0;
        let mut r = RngStream::new(13).substream(Purpose::Selection, SERVER, 0);
        let draws = 10_000;
        let hits = (0..draws).filter(|_| select_weighted(&weights, SELECTION_FLOOR, 1, &mut r).unwrap()[0] == 0).count();
        let expected = 1.0 / (1.0 + 9.0 * 0.05);
        let share = hits as f64 / draws as f64;
        assert!((share - expected).abs() / expected <= 0.05, "share {share}");
    }

    #[test]
    fn exhaustive_and_oversized_selection() {
        let mut r = RngStream::new(14).substream(Purpose::Selection, SERVER, 0);
        assert_eq!(select_weighted(&[0.0, 1.0, 0.3], SELECTION_FLOOR, 3, &mut r).unwrap(), [0, 1, 2]);
        assert_eq!(
            select_uniform(3, 4, &mut r),
            Err(Error::CohortTooLarge { size: 4, available: 3 })
        );
    }
}
