//! Probabilistic weak learners and classifiers.
//!
//! A trained classifier is a Bernoulli oracle: for each input `X` it returns
//! `+1` with some fixed probability `q(+, X)`. Training algorithms only see
//! samples, except in exact mode where synthetic oracles report `q` directly.

mod estimate;
mod oracle;
mod stump;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use estimate::{
    estimate_q, estimate_q_strategy_a, estimate_q_strategy_b, map_estimate, ml_estimate, strategy_b_rates,
    z_estimate, Estimator, FakeStopwatch, OracleEstimate, QSource, SamplingConfig, Stopwatch, StrategyAOutcome,
    StrategyBChoice, StrategyBDecision, SystemStopwatch,
};
pub use oracle::{ConstantEdgeClassifier, ConstantEdgeLearner};
pub use stump::{NoisyStump, StumpLearner};

use crate::data::{Dataset, Sign};
use crate::error::Result;
use crate::matryoshka::CompositeNode;
use crate::rng::RandomStream;

/// A randomized classifier `h(X)`.
pub trait ProbClassifier: Send + Sync + Debug {
    /// One independent draw of `h(x)`.
    fn sample(&self, x: &[f64], stream: &mut RandomStream) -> Sign;

    /// `q(+, x)` when the classifier knows it, otherwise `None`.
    fn true_q(&self, x: &[f64]) -> Option<f64>;
}

/// Trains a probabilistic classifier on weighted data.
pub trait WeakLearner: Send + Sync {
    fn train(&self, data: &Dataset, weights: &[f64]) -> Result<Classifier>;

    /// Short description recorded in model metadata.
    fn describe(&self) -> String;
}

/// The classifiers a model can hold.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Classifier {
    Stump(NoisyStump),
    ConstantEdge(ConstantEdgeClassifier),
    Composite(Box<CompositeNode>),
    /// User-supplied classifier; usable for training and prediction but not persisted.
    #[serde(skip)]
    Custom(Arc<dyn ProbClassifier>),
}

impl ProbClassifier for Classifier {
    fn sample(&self, x: &[f64], stream: &mut RandomStream) -> Sign {
        match self {
            Classifier::Stump(c) => c.sample(x, stream),
            Classifier::ConstantEdge(c) => c.sample(x, stream),
            Classifier::Composite(c) => c.sample(x, stream),
            Classifier::Custom(c) => c.sample(x, stream),
        }
    }

    fn true_q(&self, x: &[f64]) -> Option<f64> {
        match self {
            Classifier::Stump(c) => c.true_q(x),
            Classifier::ConstantEdge(c) => c.true_q(x),
            Classifier::Composite(c) => c.true_q(x),
            Classifier::Custom(c) => c.true_q(x),
        }
    }
}

impl PartialEq for Classifier {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Classifier::Stump(a), Classifier::Stump(b)) => a == b,
            (Classifier::ConstantEdge(a), Classifier::ConstantEdge(b)) => a == b,
            (Classifier::Composite(a), Classifier::Composite(b)) => a == b,
            (Classifier::Custom(a), Classifier::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Weighted expected error `Σ D(n) q(−y_n, X_n)` of a classifier with known `q`.
pub fn weighted_expected_error(classifier: &dyn ProbClassifier, data: &Dataset, weights: &[f64]) -> Option<f64> {
    let mut err = 0.0;
    for (n, w) in weights.iter().enumerate() {
        let q = classifier.true_q(data.x(n))?;
        err += w * match data.label(n) {
            Sign::Plus => 1.0 - q,
            Sign::Minus => q,
        };
    }
    Some(err)
}
