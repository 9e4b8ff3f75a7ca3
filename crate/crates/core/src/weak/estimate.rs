use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProbClassifier;
use crate::adaboost::{optimal_alphas, w_statistics, z_value};
use crate::data::{Dataset, Sign};
use crate::error::{Error, Result};
use crate::rng::{example_streams, RandomStream};

/// Maximum-likelihood estimate `count / R`.
pub fn ml_estimate(count: u64, r: u64) -> Result<f64> {
    if r == 0 {
        return Err(Error::Config("the ML estimate needs at least one observation".into()));
    }
    if count > r {
        return Err(Error::Config(format!("count {count} exceeds {r} observations")));
    }
    Ok(count as f64 / r as f64)
}

/// Posterior mean under a uniform prior, `(1 + count) / (R + 2)`.
pub fn map_estimate(count: u64, r: u64) -> f64 {
    (1 + count) as f64 / (r + 2) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Map,
    Ml,
}

impl Estimator {
    pub fn estimate(self, count: u64, r: u64) -> Result<f64> {
        match self {
            Estimator::Map => Ok(map_estimate(count, r)),
            Estimator::Ml => ml_estimate(count, r),
        }
    }
}

/// Sampling limits shared by both strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub estimator: Estimator,
    pub r_min: u64,
    pub r_max: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { estimator: Estimator::Map, r_min: 2, r_max: 10_000 }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_min == 0 || self.r_max == 0 {
            return Err(Error::Config("r_min and r_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Where branch probabilities come from during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum QSource {
    /// The classifier's own `true_q`; fails for classifiers that cannot report it.
    Exact,
    /// Strategy A sampling.
    Sampled(SamplingConfig),
}

impl Default for QSource {
    fn default() -> Self {
        QSource::Sampled(SamplingConfig::default())
    }
}

/// Running oracle counts for every example of a dataset.
#[derive(Debug, Clone)]
pub struct OracleEstimate {
    rounds: u64,
    plus: Vec<u64>,
    streams: Vec<RandomStream>,
}

impl OracleEstimate {
    /// One random stream per example, keyed by `(seed, purpose, n)`.
    pub fn new(seed: u64, purpose: &str, n: usize) -> Self {
        OracleEstimate { rounds: 0, plus: vec![0; n], streams: example_streams(seed, purpose, n) }
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn plus_counts(&self) -> &[u64] {
        &self.plus
    }

    /// Calls the classifier once on every example.
    pub fn sample_round(&mut self, classifier: &dyn ProbClassifier, data: &Dataset) {
        self.plus.par_iter_mut().zip(self.streams.par_iter_mut()).enumerate().for_each(|(n, (count, stream))| {
            if classifier.sample(data.x(n), stream) == Sign::Plus {
                *count += 1;
            }
        });
        self.rounds += 1;
    }

    pub fn q_plus(&self, estimator: Estimator) -> Result<Vec<f64>> {
        self.plus.iter().map(|&c| estimator.estimate(c, self.rounds)).collect()
    }

    fn snapshot(&self) -> (u64, Vec<u64>) {
        (self.rounds, self.plus.clone())
    }

    fn restore(&mut self, (rounds, plus): (u64, Vec<u64>)) {
        self.rounds = rounds;
        self.plus = plus;
    }
}

/// `Z` at the smoothed optimal alphas for the given branch probabilities.
pub fn z_estimate(data: &Dataset, weights: &[f64], q_plus: &[f64]) -> f64 {
    let w = w_statistics(data.labels(), weights, q_plus);
    let (ap, am) = optimal_alphas(&w);
    z_value(&w, ap, am)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyAOutcome {
    pub q_plus: Vec<f64>,
    /// Rounds behind the returned estimates.
    pub rounds_used: u64,
    /// Rounds actually sampled, including the one that triggered the stop.
    pub rounds_sampled: u64,
    /// `Z` estimate after each sampled round.
    pub z_history: Vec<f64>,
    pub hit_cap: bool,
}

/// Samples round after round until the `Z` estimate stops decreasing.
///
/// Comparisons start after `r_min` rounds. When round `r` gives a `Z` no
/// smaller than round `r - 1`, the estimates of round `r - 1` are returned
/// and `estimate` is rolled back to them. Sampling continues from whatever
/// counts `estimate` already holds.
pub fn estimate_q_strategy_a(
    classifier: &dyn ProbClassifier,
    data: &Dataset,
    weights: &[f64],
    config: &SamplingConfig,
    estimate: &mut OracleEstimate,
) -> Result<StrategyAOutcome> {
    config.validate()?;
    let mut z_history = Vec::new();
    let mut previous: Option<(Vec<f64>, f64)> = None;
    let mut sampled = 0;
    loop {
        let before = estimate.snapshot();
        estimate.sample_round(classifier, data);
        sampled += 1;
        let q = estimate.q_plus(config.estimator)?;
        let z = z_estimate(data, weights, &q);
        z_history.push(z);
        if let Some((prev_q, prev_z)) = &previous {
            if sampled > config.r_min && z >= *prev_z {
                let prev_q = prev_q.clone();
                estimate.restore(before);
                return Ok(StrategyAOutcome {
                    q_plus: prev_q,
                    rounds_used: estimate.rounds(),
                    rounds_sampled: sampled,
                    z_history,
                    hit_cap: false,
                });
            }
        }
        if sampled >= config.r_max {
            return Ok(StrategyAOutcome {
                q_plus: q,
                rounds_used: estimate.rounds(),
                rounds_sampled: sampled,
                z_history,
                hit_cap: true,
            });
        }
        previous = Some((q, z));
    }
}

/// Branch probabilities `q(+, X_n)` from the configured source.
///
/// Returns the estimates and the number of oracle rounds spent (0 when exact).
pub fn estimate_q(
    classifier: &dyn ProbClassifier,
    data: &Dataset,
    weights: &[f64],
    source: &QSource,
    seed: u64,
    purpose: &str,
) -> Result<(Vec<f64>, u64)> {
    match source {
        QSource::Exact => {
            let q = (0..data.len())
                .map(|n| classifier.true_q(data.x(n)).ok_or(Error::ExactQUnavailable))
                .collect::<Result<Vec<_>>>()?;
            Ok((q, 0))
        }
        QSource::Sampled(config) => {
            let mut estimate = OracleEstimate::new(seed, purpose, data.len());
            let out = estimate_q_strategy_a(classifier, data, weights, config, &mut estimate)?;
            Ok((out.q_plus, out.rounds_sampled))
        }
    }
}

/// A clock reading seconds.
pub trait Stopwatch {
    fn now(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct SystemStopwatch {
    start: Instant,
}

impl Default for SystemStopwatch {
    fn default() -> Self {
        SystemStopwatch { start: Instant::now() }
    }
}

impl Stopwatch for SystemStopwatch {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Scripted clock: each reading returns the next scripted time, then the last one forever.
#[derive(Debug, Default)]
pub struct FakeStopwatch {
    times: Mutex<VecDeque<f64>>,
    last: Mutex<f64>,
}

impl FakeStopwatch {
    pub fn new(times: impl IntoIterator<Item = f64>) -> Self {
        FakeStopwatch { times: Mutex::new(times.into_iter().collect()), last: Mutex::new(0.0) }
    }
}

impl Stopwatch for FakeStopwatch {
    fn now(&self) -> f64 {
        let mut last = self.last.lock().unwrap();
        if let Some(t) = self.times.lock().unwrap().pop_front() {
            *last = t;
        }
        *last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyBChoice {
    /// Keep the freshly trained classifier.
    TrainNext,
    /// Keep the refined estimate of the current classifier.
    Resample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyBDecision {
    pub choice: StrategyBChoice,
    pub rate_a: f64,
    pub rate_b: f64,
    pub elapsed_a: f64,
    pub elapsed_b: f64,
}

/// Compares `Z_{T+1}^{1/S_A}` against `(Z'_T / Z_T)^{1/S_B}`; the smaller wins, ties go to A.
pub fn strategy_b_rates(z_next: f64, elapsed_a: f64, z_ratio: f64, elapsed_b: f64) -> StrategyBDecision {
    let elapsed_a = elapsed_a.max(f64::MIN_POSITIVE);
    let elapsed_b = elapsed_b.max(f64::MIN_POSITIVE);
    let rate_a = z_next.powf(1.0 / elapsed_a);
    let rate_b = z_ratio.powf(1.0 / elapsed_b);
    let choice = if rate_a <= rate_b { StrategyBChoice::TrainNext } else { StrategyBChoice::Resample };
    StrategyBDecision { choice, rate_a, rate_b, elapsed_a, elapsed_b }
}

/// Runs and times both options, then picks one.
///
/// `option_a` trains and samples a candidate and returns it with `Z_{T+1}`;
/// `option_b` resamples the current classifier and returns the refreshed
/// state with `Z'_T / Z_T`. Both payloads come back; the caller keeps the
/// one matching the decision.
pub fn estimate_q_strategy_b<TA, TB>(
    stopwatch: &dyn Stopwatch,
    option_a: impl FnOnce() -> Result<(TA, f64)>,
    option_b: impl FnOnce() -> Result<(TB, f64)>,
) -> Result<(StrategyBDecision, TA, TB)> {
    let t0 = stopwatch.now();
    let (a, z_next) = option_a()?;
    let t1 = stopwatch.now();
    let (b, ratio) = option_b()?;
    let t2 = stopwatch.now();
    Ok((strategy_b_rates(z_next, t1 - t0, ratio, t2 - t1), a, b))
}
