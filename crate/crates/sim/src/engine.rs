//! The round loop: client-side training and attacks, server-side scoring,
//! thresholding, clipping, aggregation and reputation evolution.
//!
//! Client-side work inside a round runs on the rayon pool and is joined
//! before any server-side step. Every random draw comes from a substream
//! keyed by `(purpose, client, round)`, so results do not depend on thread
//! scheduling or on the order clients are visited.

use std::time::Instant;

use flare_core::adversary::{make_update, SmSpec};
use flare_core::aggregation::{
    apply_ldp, clip_update, fedavg_aggregate, flare_aggregate, krum_aggregate, median_norm,
    trimmed_mean_aggregate, WeightedUpdate,
};
use flare_core::assessment::{
    anomaly_rate, classify, convergence_metric, evolve_reputation, update_threshold, DetectionRecord,
    PatternHistory,
};
use flare_core::metrics::{self, ConfusionCounts, DetectionScores};
use flare_core::reputation::{
    anomaly_distance, anomaly_score, composite_score, compute_dynamic_weights, consistency_score,
    temporal_score, WeightInputs,
};
use flare_core::rng::SERVER;
use flare_core::simenv::{self, ResponseProfile, SyntheticTask};
use flare_core::{
    AggregatorKind, AttackPattern, AttackSpec, Class, ClientState, CollusionPool, DynamicWeights,
    ModelVector, Purpose, Role, RngStream, SmSchedule, ThresholdState, VarianceTracker,
};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::{AttackMix, DistanceScale, ExperimentConfig, ReputationMode, Selection};

pub type Result<T> = std::result::Result<T, flare_core::Error>;

/// Observables of one round. Optional fields are absent for aggregators
/// that do not produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub theta: Option<f64>,
    pub conv: Option<f64>,
    pub anomaly_rate: Option<f64>,
    pub weights: Option<[f64; 3]>,
    pub pattern: Option<AttackPattern>,
    /// Trusted, suspicious, untrusted counts over the cohort.
    pub classes: Option<[usize; 3]>,
    /// Cohort-level confusion of this round's verdict.
    pub confusion: Option<ConfusionCounts>,
    pub cohort_malicious: usize,
    /// Cohort members whose update carried an attack this round.
    pub attacks_sent: usize,
    pub aggregated: usize,
    pub stalled: bool,
    pub median_norm: f64,
    /// Mean stored reputation per role, in [`Role::ALL`] order.
    pub mean_reputation: [Option<f64>; 7],
    /// Mean `[r1, r2, r3]` over benign and over malicious cohort members.
    pub components_benign: Option<[f64; 3]>,
    pub components_malicious: Option<[f64; 3]>,
    /// Model displacement along the attack direction.
    pub displacement: Option<f64>,
    /// Part of the displacement caused by SM payloads: the aggregate minus the
    /// aggregate had SM clients sent their honest updates, projected on `d`.
    pub sm_drift: Option<f64>,
    pub sm_gamma: Option<f64>,
    /// Server-side wall time of scoring plus aggregation.
    pub server_seconds: f64,
}

/// Everything a finished repetition produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub logs: Vec<RoundLog>,
    pub final_theta: Option<f64>,
    /// Final-round Untrusted verdict over all clients (FLARE only).
    pub confusion: Option<ConfusionCounts>,
    /// Clients flagged Untrusted in at least one round they took part in.
    pub ever_flagged: Option<ConfusionCounts>,
    pub reference_loss: f64,
    pub reference_accuracy: f64,
    pub final_reputations: Vec<(Role, f64)>,
}

impl RunOutcome {
    pub fn accuracies(&self) -> Vec<f64> {
        self.logs.iter().map(|l| l.test_accuracy).collect()
    }

    /// Mean accuracy over the final rounds.
    pub fn final_accuracy(&self) -> f64 {
        metrics::final_mean(&self.accuracies())
    }

    pub fn final_loss(&self) -> f64 {
        let losses: Vec<f64> = self.logs.iter().map(|l| l.test_loss).collect();
        metrics::final_mean(&losses)
    }

    pub fn convergence_round(&self) -> Option<usize> {
        metrics::convergence_round(&self.accuracies())
    }

    pub fn detection(&self) -> Option<DetectionScores> {
        self.confusion.map(|c| c.scores())
    }

    pub fn untrusted_count(&self) -> Option<usize> {
        self.confusion.map(|c| c.tp + c.fp)
    }

    pub fn server_seconds(&self) -> f64 {
        self.logs.iter().map(|l| l.server_seconds).sum()
    }

    fn mean_of(&self, f: impl Fn(&RoundLog) -> Option<f64>) -> Option<f64> {
        let v: Vec<f64> = self.logs.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn mean_sm_drift(&self) -> Option<f64> {
        self.mean_of(|l| l.sm_drift)
    }

    pub fn mean_sm_gamma(&self) -> Option<f64> {
        self.mean_of(|l| l.sm_gamma)
    }
}

/// Per cohort member: the honest update, what was sent, and whether it was an attack.
/// The collusion pool is present when the cohort holds colluders.
type ClientPhase = (Vec<ModelVector>, Vec<ModelVector>, Vec<bool>, Option<CollusionPool>);

/// Server and client state of one repetition.
pub struct Simulation {
    cfg: ExperimentConfig,
    seed: u64,
    rng: RngStream,
    task: SyntheticTask,
    clients: Vec<ClientState>,
    profiles: Vec<ResponseProfile>,
    specs: Vec<(Role, AttackSpec)>,
    direction: ModelVector,
    sm_share: f64,
    model: ModelVector,
    prev_model: ModelVector,
    tracker: VarianceTracker,
    threshold: ThresholdState,
    weights: DynamicWeights,
    history: PatternHistory,
    ever_flagged: Vec<bool>,
    round: usize,
}

/// Assigns roles: a seeded shuffle picks the malicious clients, and the
/// attack mix hands out behaviours (round-robin for "all").
pub fn assign_roles(n_clients: usize, n_malicious: usize, mix: AttackMix, rng: &RngStream) -> Vec<Role> {
    let mut order: Vec<usize> = (0..n_clients).collect();
    order.shuffle(&mut rng.substream(Purpose::Roles, SERVER, 0));
    let mut roles = vec![Role::Benign; n_clients];
    for (k, &id) in order.iter().take(n_malicious).enumerate() {
        roles[id] = match mix {
            AttackMix::None => Role::Benign,
            AttackMix::Single(r) => r,
            AttackMix::All => Role::ATTACKS[k % Role::ATTACKS.len()],
        };
    }
    roles
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let rng = RngStream::new(seed);
        let mut task = simenv::generate_federation(&cfg.task, &rng)?;
        let reference = task.fit_reference(cfg.reference_iterations, cfg.reference_learning_rate).clone();
        let direction = reference.scaled(-1.0).normalized().unwrap_or_else(|| {
            let mut e = vec![0.0; task.dim()];
            e[0] = 1.0;
            ModelVector::new(e).expect("finite")
        });

        let roles = assign_roles(cfg.n_clients(), cfg.n_malicious(), cfg.attack, &rng);
        let hp = &cfg.hyper;
        let clients: Vec<ClientState> = roles
            .iter()
            .enumerate()
            .map(|(i, &role)| {
                ClientState::new(i, role, task.clients[i].len(), hp.participation_window, hp.response_window)
            })
            .collect();
        let profiles = roles.iter().enumerate().map(|(i, &r)| ResponseProfile::for_client(i, r, &rng)).collect();

        let a = &cfg.attack_params;
        let horizon = a.sm_horizon.unwrap_or(hp.rounds);
        let schedule = match a.sm_total_bias {
            Some(total_bias) => SmSchedule::Constant { total_bias, horizon },
            None => SmSchedule::RelativeToNorm { fraction: a.sm_gamma_fraction },
        };
        let specs = vec![
            (Role::LabelFlip, AttackSpec::LabelFlip),
            (Role::ByzantineGradient, AttackSpec::ByzantineGradient { variance: a.byzantine_variance }),
            (Role::GradientScaling, AttackSpec::GradientScaling { lambda: a.scaling_lambda }),
            (Role::Adaptive, AttackSpec::Adaptive { attack_prob: a.adaptive_prob, payload_lambda: a.adaptive_lambda }),
            (Role::Alie, AttackSpec::Alie { z: a.alie_z, direction: direction.clone() }),
            (
                Role::StatisticalMimicry,
                AttackSpec::StatisticalMimicry(SmSpec {
                    mix_alpha: a.sm_alpha,
                    schedule,
                    direction: direction.clone(),
                    clip: a.sm_clip.then_some(hp.c_ldp),
                }),
            ),
        ];
        for (_, s) in &specs {
            s.validate()?;
        }
        let sm_share = roles.iter().filter(|&&r| r == Role::StatisticalMimicry).count() as f64 / roles.len() as f64;

        let dim = task.dim();
        let mut clients = clients;
        if let Some(r) = cfg.flare.pin_reputation {
            clients.iter_mut().for_each(|c| c.set_reputation(r));
        }
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            rng,
            task,
            ever_flagged: vec![false; clients.len()],
            clients,
            profiles,
            specs,
            direction,
            sm_share,
            model: ModelVector::zeros(dim),
            prev_model: ModelVector::zeros(dim),
            tracker: VarianceTracker::new(),
            threshold: ThresholdState::initial(&cfg.hyper),
            weights: DynamicWeights::default(),
            history: PatternHistory::default(),
            round: 0,
        })
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn model(&self) -> &ModelVector {
        &self.model
    }

    pub fn task(&self) -> &SyntheticTask {
        &self.task
    }

    pub fn threshold(&self) -> ThresholdState {
        self.threshold
    }

    pub fn attack_direction(&self) -> &ModelVector {
        &self.direction
    }

    /// Fraction of all clients running the SM attack.
    pub fn sm_share(&self) -> f64 {
        self.sm_share
    }

    fn spec(&self, role: Role) -> Option<&AttackSpec> {
        self.specs.iter().find(|(r, _)| *r == role).map(|(_, s)| s)
    }

    fn select(&self, t: usize) -> Result<Vec<usize>> {
        let mut r = self.rng.substream(Purpose::Selection, SERVER, t as u64);
        let size = self.cfg.hyper.cohort_size;
        match self.cfg.selection {
            Selection::Reputation => simenv::select_cohort(&self.clients, size, &mut r),
            Selection::Uniform => simenv::select_uniform(self.clients.len(), size, &mut r),
        }
    }

    /// Local training, attacks and LDP for the cohort, in cohort order.
    fn client_phase(&self, cohort: &[usize], t: usize) -> Result<ClientPhase> {
        let hp = &self.cfg.hyper;
        let honest: Vec<ModelVector> = cohort
            .par_iter()
            .map(|&id| {
                let mut r = self.rng.substream(Purpose::Training, id as u64, t as u64);
                let flip = self.clients[id].role == Role::LabelFlip;
                simenv::local_train(&self.model, &self.task.clients[id], hp, flip, &mut r)
            })
            .collect::<Result<_>>()?;

        let (members, grads): (Vec<usize>, Vec<ModelVector>) = cohort
            .iter()
            .zip(&honest)
            .filter(|(&id, _)| self.clients[id].role.colludes())
            .map(|(&id, g)| (id, g.clone()))
            .unzip();
        let pool = if members.is_empty() { None } else { Some(CollusionPool::from_members(members, &grads)?) };

        let sent: Vec<(ModelVector, bool)> = cohort
            .par_iter()
            .zip(&honest)
            .map(|(&id, h)| {
                let role = self.clients[id].role;
                let mut r = self.rng.substream(Purpose::Attack, id as u64, t as u64);
                let (u, attacked) = make_update(id, role, h, self.spec(role), pool.as_ref(), t, &mut r)?;
                let u = if hp.sigma_ldp > 0.0 {
                    let mut r = self.rng.substream(Purpose::Ldp, id as u64, t as u64);
                    apply_ldp(&u, hp.c_ldp, hp.sigma_ldp, &mut r)
                } else {
                    u
                };
                Ok((u, attacked))
            })
            .collect::<Result<_>>()?;
        let (sent, attacked): (Vec<_>, Vec<_>) = sent.into_iter().unzip();
        Ok((honest, sent, attacked, pool))
    }

    fn record_participation(&mut self, cohort: &[usize], t: usize) {
        let mut in_cohort = vec![false; self.clients.len()];
        for &id in cohort {
            in_cohort[id] = true;
            let mut r = self.rng.substream(Purpose::Response, id as u64, t as u64);
            simenv::simulate_response(&mut self.clients[id], &self.profiles[id], &mut r);
        }
        for (c, &p) in self.clients.iter_mut().zip(&in_cohort) {
            c.participation.push(p);
        }
    }

    fn mean_reputation(&self) -> [Option<f64>; 7] {
        Role::ALL.map(|role| {
            let reps: Vec<f64> = self.clients.iter().filter(|c| c.role == role).map(ClientState::reputation).collect();
            (!reps.is_empty()).then(|| reps.iter().sum::<f64>() / reps.len() as f64)
        })
    }

    /// Runs one round and returns its log.
    pub fn step(&mut self) -> Result<RoundLog> {
        self.round += 1;
        let t = self.round;
        let cohort = self.select(t)?;
        let (honest, sent, attacked, pool) = self.client_phase(&cohort, t)?;
        self.record_participation(&cohort, t);

        let start = Instant::now();
        let mut outcome = match self.cfg.aggregator {
            AggregatorKind::Flare => self.flare_server(&cohort, &sent, t)?,
            kind => self.baseline_server(kind, &cohort, &sent)?,
        };
        let server_seconds = start.elapsed().as_secs_f64();

        // SM payload impact: re-aggregate with the SM clients' honest updates.
        let uses_sm = cohort.iter().any(|&id| self.clients[id].role == Role::StatisticalMimicry);
        let sm_gamma = match self.spec(Role::StatisticalMimicry) {
            Some(AttackSpec::StatisticalMimicry(sm)) if self.sm_share > 0.0 => {
                // With no colluder in the cohort the schedule is still defined;
                // the whole cohort's honest updates stand in for the pool so
                // rounds without SM clients do not log a zero bias.
                let stand_in;
                let basis = match pool.as_ref() {
                    Some(p) => p,
                    None => {
                        stand_in = CollusionPool::from_members(cohort.to_vec(), &honest)?;
                        &stand_in
                    }
                };
                Some(sm.schedule.gamma(t, basis))
            }
            _ => None,
        };
        let sm_drift = if self.sm_share > 0.0 {
            if uses_sm {
                let counterfactual: Vec<ModelVector> = cohort
                    .iter()
                    .zip(sent.iter().zip(&honest))
                    .map(|(&id, (s, h))| if self.clients[id].role == Role::StatisticalMimicry { h.clone() } else { s.clone() })
                    .collect();
                let alt = self.aggregate_with(&outcome.plan, &counterfactual)?;
                Some(outcome.model.sub(&alt)?.dot(&self.direction)?)
            } else {
                Some(0.0)
            }
        } else {
            None
        };

        let displacement = outcome.model.sub(&self.model)?.dot(&self.direction)?;
        self.prev_model = std::mem::replace(&mut self.model, std::mem::replace(&mut outcome.model, ModelVector::zeros(0)));
        let (test_loss, test_accuracy) = simenv::evaluate(&self.model, &self.task.test);

        let cohort_malicious = cohort.iter().filter(|&&id| self.clients[id].role.is_malicious()).count();
        Ok(RoundLog {
            round: t,
            test_loss,
            test_accuracy,
            theta: outcome.theta,
            conv: outcome.conv,
            anomaly_rate: outcome.anomaly_rate,
            weights: outcome.weights,
            pattern: outcome.pattern,
            classes: outcome.classes,
            confusion: outcome.confusion,
            cohort_malicious,
            attacks_sent: attacked.iter().filter(|&&a| a).count(),
            aggregated: outcome.aggregated,
            stalled: outcome.stalled,
            median_norm: outcome.median_norm,
            mean_reputation: self.mean_reputation(),
            components_benign: outcome.components[0],
            components_malicious: outcome.components[1],
            displacement: Some(displacement),
            sm_drift,
            sm_gamma,
            server_seconds,
        })
    }

    /// Re-applies a round's aggregation rule to a different set of updates.
    fn aggregate_with(&self, plan: &AggregationPlan, updates: &[ModelVector]) -> Result<ModelVector> {
        match plan {
            AggregationPlan::Weighted { members, weights, clip } => {
                let prepared: Vec<ModelVector> =
                    members.iter().map(|&k| clip.map_or_else(|| updates[k].clone(), |c| clip_update(&updates[k], c))).collect();
                let parts: Vec<WeightedUpdate<'_>> = prepared
                    .iter()
                    .zip(weights)
                    .map(|(u, &(reputation, n_samples))| WeightedUpdate { update: u, reputation, n_samples })
                    .collect();
                flare_aggregate(&self.model, &parts)
            }
            AggregationPlan::FedAvg { samples } => {
                let parts: Vec<(&ModelVector, usize)> = updates.iter().zip(samples.iter().copied()).collect();
                fedavg_aggregate(&self.model, &parts)
            }
            AggregationPlan::Krum { f } => Ok(krum_aggregate(&self.model, updates, *f)?.0),
            AggregationPlan::Trimmed { trim } => trimmed_mean_aggregate(&self.model, updates, *trim),
        }
    }

    fn baseline_server(&self, kind: AggregatorKind, cohort: &[usize], sent: &[ModelVector]) -> Result<ServerOutcome> {
        let median = median_norm(sent)?;
        let mut out = ServerOutcome::blank(median, cohort.len());
        match kind {
            AggregatorKind::FedAvg => {
                let samples: Vec<usize> = cohort.iter().map(|&id| self.clients[id].n_samples).collect();
                let parts: Vec<(&ModelVector, usize)> = sent.iter().zip(samples.iter().copied()).collect();
                out.model = fedavg_aggregate(&self.model, &parts)?;
                out.plan = AggregationPlan::FedAvg { samples };
            }
            AggregatorKind::Krum { f } => {
                let (model, idx) = krum_aggregate(&self.model, sent, f)?;
                out.model = model;
                out.aggregated = 1;
                let mut c = ConfusionCounts::default();
                for (k, &id) in cohort.iter().enumerate() {
                    c.record(self.clients[id].role.is_malicious(), k != idx);
                }
                out.confusion = Some(c);
                out.classes = Some([1, 0, cohort.len() - 1]);
                out.plan = AggregationPlan::Krum { f };
            }
            AggregatorKind::TrimmedMean { trim } => {
                out.model = trimmed_mean_aggregate(&self.model, sent, trim)?;
                out.plan = AggregationPlan::Trimmed { trim };
            }
            AggregatorKind::Flare => unreachable!("FLARE has its own server path"),
        }
        Ok(out)
    }

    fn flare_server(&mut self, cohort: &[usize], sent: &[ModelVector], t: usize) -> Result<ServerOutcome> {
        let hp = self.cfg.hyper.clone();
        let opts = self.cfg.flare.clone();
        let n = cohort.len();
        let prev_threshold = self.threshold;

        let conv = if t == 1 { 0.0 } else { convergence_metric(&self.model, &self.prev_model)? };
        let pattern = self.history.analyze();

        let mut steps = Vec::with_capacity(n);
        let mut components = Vec::with_capacity(n);
        let reps: Vec<f64> = if let Some(pinned) = opts.pin_reputation {
            vec![pinned; n]
        } else {
            let mean = self.tracker.update(sent, hp.alpha_cov)?;
            let scale = match opts.distance_scale {
                DistanceScale::Raw => 1.0,
                DistanceScale::PerCoordinate => (sent[0].dim() as f64).sqrt(),
            };
            for (&id, u) in cohort.iter().zip(sent) {
                let client = &self.clients[id];
                let step = consistency_score(client, u, hp.alpha)?;
                let d = anomaly_distance(u, &mean, &self.tracker)? / scale;
                let r2 = anomaly_score(d, hp.tau_d, hp.lambda);
                let r3 = temporal_score(client, hp.beta);
                components.push([step.r1, r2, r3]);
                steps.push(step);
            }
            let prev_reputation: Vec<f64> = cohort.iter().map(|&id| self.clients[id].reputation()).collect();
            self.weights = compute_dynamic_weights(
                WeightInputs {
                    components: &components,
                    prev_reputation: &prev_reputation,
                    prev_threshold: prev_threshold.theta,
                    conv,
                    pattern,
                    tau_conv: hp.tau_conv,
                    smooth: t > 1,
                },
                &self.weights,
            )?;
            components.iter().map(|c| composite_score(c, &self.weights)).collect()
        };
        check_bounds(&reps, &components)?;

        let anomaly = anomaly_rate(&reps, prev_threshold.cut());
        self.threshold = update_threshold(&hp, conv, anomaly);
        let theta = self.threshold.theta;
        let cut = self.threshold.cut();

        let median = median_norm(sent)?;
        let clip = opts.median_clip.then_some(median);
        let mut members = Vec::new();
        let mut weights = Vec::new();
        for (k, (&id, &r)) in cohort.iter().zip(&reps).enumerate() {
            let keep = if opts.disable_threshold {
                true
            } else if opts.soft_exclusion {
                r >= cut
            } else {
                r >= theta
            };
            if keep {
                members.push(k);
                weights.push(if opts.soft_exclusion { (r, self.clients[id].n_samples) } else { (1.0, 1) });
            }
        }
        let plan = AggregationPlan::Weighted { members, weights, clip };
        let model = self.aggregate_with(&plan, sent)?;
        let AggregationPlan::Weighted { members, weights, .. } = &plan else { unreachable!() };
        let stalled = members.is_empty() || weights.iter().all(|&(r, n)| r * n as f64 <= 0.0);
        let aggregated = members.len();

        let mut classes = [0usize; 3];
        let mut confusion = ConfusionCounts::default();
        let mut records = Vec::with_capacity(n);
        for (k, (&id, &r)) in cohort.iter().zip(&reps).enumerate() {
            let class = classify(r, theta).class;
            classes[match class {
                Class::Trusted => 0,
                Class::Suspicious => 1,
                Class::Untrusted => 2,
            }] += 1;
            let flagged = r < cut;
            confusion.record(self.clients[id].role.is_malicious(), flagged);
            if flagged {
                self.ever_flagged[id] = true;
            }
            if opts.pin_reputation.is_some() {
                continue;
            }
            let client = &mut self.clients[id];
            let base = match opts.reputation_mode {
                ReputationMode::Overwrite => r,
                ReputationMode::Accumulate => client.reputation(),
            };
            client.set_reputation(evolve_reputation(base, !flagged, &hp));
            let step = &steps[k];
            client.components = components[k];
            client.raw_consistency = step.raw;
            client.update_ema = Some(step.ema.clone());
            records.push(DetectionRecord {
                round: t as u64,
                client: id,
                flagged,
                norm_ratio: if median > 0.0 { sent[k].norm() / median } else { 1.0 },
                reputation: r,
                cut,
                r1: components[k][0],
                r2: components[k][1],
            });
        }
        self.history.push_round(t as u64, records);
        lemma_a1(&self.clients)?;
        let by_role = |malicious: bool| {
            mean_components(
                cohort.iter().zip(&components).filter(|(&id, _)| self.clients[id].role.is_malicious() == malicious).map(|(_, c)| c),
            )
        };
        let split = [by_role(false), by_role(true)];

        Ok(ServerOutcome {
            model,
            plan,
            theta: Some(theta),
            conv: Some(conv),
            anomaly_rate: Some(anomaly),
            weights: Some(self.weights.w),
            pattern: Some(pattern),
            classes: Some(classes),
            confusion: Some(confusion),
            aggregated,
            stalled,
            median_norm: median,
            components: split,
        })
    }

    /// Runs every configured round.
    pub fn run(mut self) -> Result<RunOutcome> {
        let mut logs = Vec::with_capacity(self.cfg.hyper.rounds);
        for _ in 0..self.cfg.hyper.rounds {
            logs.push(self.step()?);
        }
        Ok(self.finish(logs))
    }

    pub fn finish(self, logs: Vec<RoundLog>) -> RunOutcome {
        let flare = self.cfg.aggregator == AggregatorKind::Flare;
        let final_theta = flare.then_some(self.threshold.theta);
        let confusion = final_theta.map(|theta| metrics::confusion(&self.clients, theta));
        let ever_flagged = flare.then(|| {
            let mut c = ConfusionCounts::default();
            for (client, &f) in self.clients.iter().zip(&self.ever_flagged) {
                c.record(client.role.is_malicious(), f);
            }
            c
        });
        let reference = self.task.reference.clone().expect("reference fitted at setup");
        let (reference_loss, reference_accuracy) = simenv::evaluate(&reference, &self.task.test);
        RunOutcome {
            seed: self.seed,
            logs,
            final_theta,
            confusion,
            ever_flagged,
            reference_loss,
            reference_accuracy,
            final_reputations: self.clients.iter().map(|c| (c.role, c.reputation())).collect(),
        }
    }
}

/// Which updates were combined and how, so the same rule can be replayed.
enum AggregationPlan {
    /// Members are cohort positions; weights are `(R, n)` pairs.
    Weighted { members: Vec<usize>, weights: Vec<(f64, usize)>, clip: Option<f64> },
    FedAvg { samples: Vec<usize> },
    Krum { f: usize },
    Trimmed { trim: f64 },
}

struct ServerOutcome {
    model: ModelVector,
    plan: AggregationPlan,
    theta: Option<f64>,
    conv: Option<f64>,
    anomaly_rate: Option<f64>,
    weights: Option<[f64; 3]>,
    pattern: Option<AttackPattern>,
    classes: Option<[usize; 3]>,
    confusion: Option<ConfusionCounts>,
    aggregated: usize,
    stalled: bool,
    median_norm: f64,
    components: [Option<[f64; 3]>; 2],
}

fn mean_components<'a>(rows: impl Iterator<Item = &'a [f64; 3]>) -> Option<[f64; 3]> {
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for r in rows {
        for (s, x) in sum.iter_mut().zip(r) {
            *s += x;
        }
        n += 1;
    }
    (n > 0).then(|| sum.map(|s| s / n as f64))
}

impl ServerOutcome {
    fn blank(median_norm: f64, cohort: usize) -> Self {
        Self {
            model: ModelVector::zeros(0),
            plan: AggregationPlan::FedAvg { samples: Vec::new() },
            theta: None,
            conv: None,
            anomaly_rate: None,
            weights: None,
            pattern: None,
            classes: None,
            confusion: None,
            aggregated: cohort,
            stalled: false,
            median_norm,
            components: [None, None],
        }
    }
}

fn check_bounds(reps: &[f64], components: &[[f64; 3]]) -> Result<()> {
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    if !reps.iter().copied().all(unit) {
        return Err(flare_core::Error::InvariantViolation { field: "reputation", bound: "composite score outside [0, 1]" });
    }
    if !components.iter().flatten().copied().all(unit) {
        return Err(flare_core::Error::InvariantViolation { field: "components", bound: "evidence score outside [0, 1]" });
    }
    Ok(())
}

/// Hard check that every stored reputation lies in `[0, 1]`.
fn lemma_a1(clients: &[ClientState]) -> Result<()> {
    if clients.iter().all(|c| (0.0..=1.0).contains(&c.reputation())) {
        Ok(())
    } else {
        Err(flare_core::Error::InvariantViolation { field: "reputation", bound: "stored reputation outside [0, 1]" })
    }
}

/// Runs one repetition with the given seed.
pub fn run_once(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    Simulation::new(cfg, seed)?.run()
}
