//! Probabilistic AdaBoost with domain-partitioned stage weights.
//!
//! Stage `t` contributes `α_{t,+}` when its classifier answers `+1` and
//! `−α_{t,−}` when it answers `−1`. Weights follow
//! `D_{t+1}(n) ∝ D_t(n) (q e^{−α₊ y} + (1 − q) e^{α₋ y})`, and the product of
//! the normalizers `Z_t` bounds the expected exponential loss.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{stable_sum, Dataset, Sign};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::weak::{
    estimate_q_strategy_a, estimate_q_strategy_b, z_estimate, Classifier, OracleEstimate, ProbClassifier, QSource,
    SamplingConfig, Stopwatch, StrategyBChoice, SystemStopwatch, WeakLearner,
};

/// Smoothing added to both sides of the alpha log-ratio.
pub const ALPHA_SMOOTHING: f64 = 1e-8;

/// Largest stage count accepted by exact enumeration.
pub const ENUMERATION_CAP: usize = 20;

/// Weighted output/label co-occurrence `W^{ab}`: output `a`, label `b`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WStats {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl WStats {
    pub fn get(&self, output: Sign, label: Sign) -> f64 {
        match (output, label) {
            (Sign::Plus, Sign::Plus) => self.pp,
            (Sign::Plus, Sign::Minus) => self.pm,
            (Sign::Minus, Sign::Plus) => self.mp,
            (Sign::Minus, Sign::Minus) => self.mm,
        }
    }

    pub fn total(&self) -> f64 {
        self.pp + self.pm + self.mp + self.mm
    }
}

/// `W^{ab} = Σ_{n | y_n = b} D(n) q̂(a, X_n)`.
pub fn w_statistics(labels: &[Sign], weights: &[f64], q_plus: &[f64]) -> WStats {
    let mut w = WStats::default();
    for ((y, d), q) in labels.iter().zip(weights).zip(q_plus) {
        match y {
            Sign::Plus => {
                w.pp += d * q;
                w.mp += d * (1.0 - q);
            }
            Sign::Minus => {
                w.pm += d * q;
                w.mm += d * (1.0 - q);
            }
        }
    }
    w
}

/// `½ ln((W^{++}+δ)/(W^{+−}+δ))` and `½ ln((W^{−−}+δ)/(W^{−+}+δ))`.
pub fn optimal_alphas(w: &WStats) -> (f64, f64) {
    let d = ALPHA_SMOOTHING;
    (0.5 * ((w.pp + d) / (w.pm + d)).ln(), 0.5 * ((w.mm + d) / (w.mp + d)).ln())
}

/// The normalizer `W^{++}e^{−α₊} + W^{+−}e^{α₊} + W^{−+}e^{α₋} + W^{−−}e^{−α₋}`.
pub fn z_value(w: &WStats, alpha_plus: f64, alpha_minus: f64) -> f64 {
    w.pp * (-alpha_plus).exp() + w.pm * alpha_plus.exp() + w.mp * alpha_minus.exp() + w.mm * (-alpha_minus).exp()
}

fn loss_factor(q_plus: f64, y: Sign, alpha_plus: f64, alpha_minus: f64) -> f64 {
    let y = y.value();
    q_plus * (-alpha_plus * y).exp() + (1.0 - q_plus) * (alpha_minus * y).exp()
}

/// One reweighting step; returns `D_{t+1}` and `Z_t`.
pub fn update_weights(
    weights: &[f64],
    labels: &[Sign],
    q_plus: &[f64],
    alpha_plus: f64,
    alpha_minus: f64,
) -> Result<(Vec<f64>, f64)> {
    if weights.len() != labels.len() || weights.len() != q_plus.len() {
        return Err(Error::Dataset("weights, labels and q table differ in length".into()));
    }
    let raw: Vec<f64> = (0..weights.len())
        .map(|n| weights[n] * loss_factor(q_plus[n], labels[n], alpha_plus, alpha_minus))
        .collect();
    let z = stable_sum(raw.iter().copied());
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Weights(format!("normalizer is {z}")));
    }
    Ok((raw.into_iter().map(|w| w / z).collect(), z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub classifier: Classifier,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub z: f64,
    pub w: WStats,
    /// Training-time `q̂(+, X_n)`.
    pub q_plus: Vec<f64>,
    /// Oracle rounds behind `q_plus` (0 for exact q).
    pub oracle_rounds: u64,
}

impl Stage {
    fn build(classifier: Classifier, data: &Dataset, weights: &[f64], q_plus: Vec<f64>, rounds: u64) -> Result<(Self, Vec<f64>)> {
        let w = w_statistics(data.labels(), weights, &q_plus);
        let (alpha_plus, alpha_minus) = optimal_alphas(&w);
        let (next, z) = update_weights(weights, data.labels(), &q_plus, alpha_plus, alpha_minus)?;
        let stage = Stage { classifier, alpha_plus, alpha_minus, z, w, q_plus, oracle_rounds: rounds };
        Ok((stage, next))
    }

    /// Score contribution of one output.
    pub fn contribution(&self, output: Sign) -> f64 {
        match output {
            Sign::Plus => self.alpha_plus,
            Sign::Minus => -self.alpha_minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Strategy {
    #[default]
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub rounds: usize,
    pub q_source: QSource,
    pub strategy: Strategy,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig { rounds: 10, q_source: QSource::default(), strategy: Strategy::A, seed: 0 }
    }
}

/// One row of the per-round log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundLog {
    pub round: usize,
    #[serde(rename = "Z")]
    pub z: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub bound_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaboostModel {
    pub stages: Vec<Stage>,
    /// Training weights `D_1`.
    pub initial_weights: Vec<f64>,
}

impl AdaboostModel {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// `∏ Z_t`.
    pub fn bound(&self) -> f64 {
        self.stages.iter().map(|s| s.z).product()
    }

    pub fn log(&self) -> Vec<RoundLog> {
        let mut bound = 1.0;
        self.stages
            .iter()
            .enumerate()
            .map(|(t, s)| {
                bound *= s.z;
                RoundLog { round: t + 1, z: s.z, alpha_plus: s.alpha_plus, alpha_minus: s.alpha_minus, bound_so_far: bound }
            })
            .collect()
    }

    /// The stored training-time tables, indexed `[stage][example]`.
    pub fn training_q(&self) -> Vec<Vec<f64>> {
        self.stages.iter().map(|s| s.q_plus.clone()).collect()
    }

    /// `true_q` of every stage on every example of `data`.
    pub fn exact_q_table(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        self.stages
            .iter()
            .map(|s| (0..data.len()).map(|n| s.classifier.true_q(data.x(n)).ok_or(Error::ExactQUnavailable)).collect())
            .collect()
    }

    /// Sampled score `H(x)`.
    pub fn score(&self, x: &[f64], stream: &mut RandomStream) -> f64 {
        self.stages.iter().map(|s| s.contribution(s.classifier.sample(x, stream))).sum()
    }

    /// `Σ_n D(n) E[e^{−H(X_n) y_n}]` by enumerating all `2^T` output vectors.
    pub fn exact_expected_bound(&self, data: &Dataset, q_table: &[Vec<f64>]) -> Result<f64> {
        self.enumerate(data, q_table, |h, y| (-h * y).exp())
    }

    /// `Σ_n D(n) P(H(X_n) y_n ≤ 0)` by the same enumeration; a zero score is an error.
    pub fn exact_misclassification(&self, data: &Dataset, q_table: &[Vec<f64>]) -> Result<f64> {
        self.enumerate(data, q_table, |h, y| if h * y <= 0.0 { 1.0 } else { 0.0 })
    }

    fn enumerate<F>(&self, data: &Dataset, q_table: &[Vec<f64>], loss: F) -> Result<f64>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let t = self.stages.len();
        if t > ENUMERATION_CAP {
            return Err(Error::EnumerationCap { stages: t, cap: ENUMERATION_CAP });
        }
        if q_table.len() != t || q_table.iter().any(|q| q.len() != data.len()) {
            return Err(Error::Model("q table does not match the model and dataset".into()));
        }
        let per_example: Vec<f64> = (0..data.len())
            .into_par_iter()
            .map(|n| {
                let y = data.label(n).value();
                let mut total = 0.0;
                for mask in 0u32..(1 << t) {
                    let mut p = 1.0;
                    let mut h = 0.0;
                    for (k, stage) in self.stages.iter().enumerate() {
                        let out = if mask >> k & 1 == 0 { Sign::Plus } else { Sign::Minus };
                        let q = q_table[k][n];
                        p *= if out == Sign::Plus { q } else { 1.0 - q };
                        h += stage.contribution(out);
                    }
                    total += p * loss(h, y);
                }
                total
            })
            .collect();
        Ok(stable_sum(per_example.iter().zip(data.weights()).map(|(e, d)| e * d)))
    }
}

/// Weighted 0/1 loss estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Monte-Carlo weighted loss of a sampled scorer; a zero score counts as an error.
pub(crate) fn mc_loss<F>(data: &Dataset, trials: usize, seed: u64, purpose: &str, score: F) -> Result<LossEstimate>
where
    F: Fn(&[f64], &mut RandomStream) -> f64 + Sync,
{
    if trials == 0 {
        return Err(Error::Config("at least one trial is needed".into()));
    }
    let errors: Vec<Vec<bool>> = (0..data.len())
        .into_par_iter()
        .map(|n| {
            let mut stream = RandomStream::new(seed, purpose, n as u64);
            let y = data.label(n).value();
            (0..trials).map(|_| score(data.x(n), &mut stream) * y <= 0.0).collect()
        })
        .collect();
    let losses: Vec<f64> = (0..trials)
        .map(|k| stable_sum((0..data.len()).filter(|&n| errors[n][k]).map(|n| data.weights()[n])))
        .collect();
    let mean = stable_sum(losses.iter().copied()) / trials as f64;
    let std_error = if trials > 1 {
        let var = stable_sum(losses.iter().map(|l| (l - mean).powi(2))) / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(LossEstimate { mean, std_error, trials })
}

/// Monte-Carlo estimate of `Σ D(n) P(H(X_n) ≠ y_n)`.
pub fn mc_misclassification(model: &AdaboostModel, data: &Dataset, trials: usize, seed: u64) -> Result<LossEstimate> {
    mc_loss(data, trials, seed, "adaboost/mc", |x, s| model.score(x, s))
}

fn stage_purpose(t: usize) -> String {
    format!("adaboost/stage/{t}")
}

fn train_stage(learner: &dyn WeakLearner, data: &Dataset, weights: &[f64], round: usize) -> Result<Classifier> {
    learner.train(data, weights).map_err(|e| Error::Learner { round, source: Box::new(e) })
}

/// Trains `config.rounds` stages; Strategy B reads the system clock.
pub fn train_adaboost(data: &Dataset, learner: &dyn WeakLearner, config: &BoostConfig) -> Result<AdaboostModel> {
    train_adaboost_with_stopwatch(data, learner, config, &SystemStopwatch::default())
}

/// Resampled estimate with its `q` and `Z`.
type Resampled = (OracleEstimate, Vec<f64>, f64);

pub fn train_adaboost_with_stopwatch(
    data: &Dataset,
    learner: &dyn WeakLearner,
    config: &BoostConfig,
    stopwatch: &dyn Stopwatch,
) -> Result<AdaboostModel> {
    if config.rounds == 0 {
        return Err(Error::Config("at least one round is needed".into()));
    }
    match (config.strategy, config.q_source) {
        (Strategy::B, QSource::Sampled(sampling)) => train_strategy_b(data, learner, config, &sampling, stopwatch),
        _ => train_strategy_a(data, learner, config),
    }
}

fn train_strategy_a(data: &Dataset, learner: &dyn WeakLearner, config: &BoostConfig) -> Result<AdaboostModel> {
    let mut weights = data.weights().to_vec();
    let mut stages = Vec::with_capacity(config.rounds);
    for t in 1..=config.rounds {
        let classifier = train_stage(learner, data, &weights, t)?;
        let (q, rounds) =
            crate::weak::estimate_q(&classifier, data, &weights, &config.q_source, config.seed, &stage_purpose(t))
                .map_err(|e| Error::Learner { round: t, source: Box::new(e) })?;
        let (stage, next) = Stage::build(classifier, data, &weights, q, rounds)?;
        stages.push(stage);
        weights = next;
    }
    Ok(AdaboostModel { stages, initial_weights: data.weights().to_vec() })
}

struct Pending {
    classifier: Classifier,
    weights: Vec<f64>,
    estimate: OracleEstimate,
    q: Vec<f64>,
    z: f64,
}

impl Pending {
    fn start(classifier: Classifier, data: &Dataset, weights: Vec<f64>, sampling: &SamplingConfig, seed: u64, t: usize) -> Result<Self> {
        let mut estimate = OracleEstimate::new(seed, &stage_purpose(t), data.len());
        estimate.sample_round(&classifier, data);
        let q = estimate.q_plus(sampling.estimator)?;
        let z = z_estimate(data, &weights, &q);
        Ok(Pending { classifier, weights, estimate, q, z })
    }
}

fn train_strategy_b(
    data: &Dataset,
    learner: &dyn WeakLearner,
    config: &BoostConfig,
    sampling: &SamplingConfig,
    stopwatch: &dyn Stopwatch,
) -> Result<AdaboostModel> {
    sampling.validate()?;
    let mut stages = Vec::with_capacity(config.rounds);
    let first = train_stage(learner, data, data.weights(), 1)?;
    let mut current = Pending::start(first, data, data.weights().to_vec(), sampling, config.seed, 1)?;
    loop {
        let t = stages.len() + 1;
        if t == config.rounds {
            // the last stage has no successor to compare against
            let out = estimate_q_strategy_a(&current.classifier, data, &current.weights, sampling, &mut current.estimate)?;
            let rounds = current.estimate.rounds();
            let (stage, _) = Stage::build(current.classifier, data, &current.weights, out.q_plus, rounds)?;
            stages.push(stage);
            break;
        }
        if current.estimate.rounds() >= sampling.r_max {
            let next = advance(&mut stages, current, data, learner, sampling, config.seed)?;
            current = next;
            continue;
        }
        let option_a = || -> Result<(Pending, f64)> {
            let w = w_statistics(data.labels(), &current.weights, &current.q);
            let (ap, am) = optimal_alphas(&w);
            let (next_weights, _) = update_weights(&current.weights, data.labels(), &current.q, ap, am)?;
            let candidate = train_stage(learner, data, &next_weights, t + 1)?;
            let pending = Pending::start(candidate, data, next_weights, sampling, config.seed, t + 1)?;
            let z = pending.z;
            Ok((pending, z))
        };
        let option_b = || -> Result<(Resampled, f64)> {
            let mut estimate = current.estimate.clone();
            estimate.sample_round(&current.classifier, data);
            let q = estimate.q_plus(sampling.estimator)?;
            let z = z_estimate(data, &current.weights, &q);
            Ok(((estimate, q, z), z / current.z))
        };
        let (decision, candidate, refreshed) = estimate_q_strategy_b(stopwatch, option_a, option_b)?;
        match decision.choice {
            StrategyBChoice::TrainNext => {
                let rounds = current.estimate.rounds();
                let (stage, _) = Stage::build(current.classifier, data, &current.weights, current.q, rounds)?;
                stages.push(stage);
                current = candidate;
            }
            StrategyBChoice::Resample => {
                let (estimate, q, z) = refreshed;
                current.estimate = estimate;
                current.q = q;
                current.z = z;
            }
        }
    }
    Ok(AdaboostModel { stages, initial_weights: data.weights().to_vec() })
}

fn advance(
    stages: &mut Vec<Stage>,
    current: Pending,
    data: &Dataset,
    learner: &dyn WeakLearner,
    sampling: &SamplingConfig,
    seed: u64,
) -> Result<Pending> {
    let t = stages.len() + 1;
    let rounds = current.estimate.rounds();
    let (stage, next_weights) = Stage::build(current.classifier, data, &current.weights, current.q, rounds)?;
    stages.push(stage);
    let classifier = train_stage(learner, data, &next_weights, t + 1)?;
    Pending::start(classifier, data, next_weights, sampling, seed, t + 1)
}
