use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Classifier, ProbClassifier, WeakLearner};
use crate::data::{Dataset, Sign};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Synthetic learner whose classifier is right with probability `1/2 + ε`
/// on every training input, whatever the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEdgeLearner {
    epsilon: f64,
}

impl ConstantEdgeLearner {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.5) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1/2], got {epsilon}")));
        }
        Ok(ConstantEdgeLearner { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl WeakLearner for ConstantEdgeLearner {
    fn train(&self, data: &Dataset, _weights: &[f64]) -> Result<Classifier> {
        Ok(Classifier::ConstantEdge(ConstantEdgeClassifier::new(self.epsilon, data)))
    }

    fn describe(&self) -> String {
        format!("constant-edge(epsilon={})", self.epsilon)
    }
}

/// Knows the training labels; unseen inputs get a fair coin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantEdgeClassifier {
    pub epsilon: f64,
    labelled: Vec<(Vec<f64>, Sign)>,
    #[serde(skip)]
    index: OnceLock<HashMap<Vec<u64>, Sign>>,
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

impl ConstantEdgeClassifier {
    pub fn new(epsilon: f64, data: &Dataset) -> Self {
        let labelled = (0..data.len()).map(|n| (data.x(n).to_vec(), data.label(n))).collect();
        ConstantEdgeClassifier { epsilon, labelled, index: OnceLock::new() }
    }

    fn label_of(&self, x: &[f64]) -> Option<Sign> {
        let index = self.index.get_or_init(|| {
            let mut m = HashMap::with_capacity(self.labelled.len());
            for (x, y) in &self.labelled {
                // first occurrence wins for duplicated inputs
                m.entry(key(x)).or_insert(*y);
            }
            m
        });
        index.get(&key(x)).copied()
    }
}

impl PartialEq for ConstantEdgeClassifier {
    fn eq(&self, other: &Self) -> bool {
        self.epsilon == other.epsilon && self.labelled == other.labelled
    }
}

impl ProbClassifier for ConstantEdgeClassifier {
    fn sample(&self, x: &[f64], stream: &mut RandomStream) -> Sign {
        let q = self.true_q(x).unwrap_or(0.5);
        if stream.bernoulli(q) {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    fn true_q(&self, x: &[f64]) -> Option<f64> {
        let correct = 0.5 + self.epsilon;
        Some(match self.label_of(x) {
            Some(Sign::Plus) => correct,
            Some(Sign::Minus) => 1.0 - correct,
            None => 0.5,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak::weighted_expected_error;

    fn data() -> Dataset {
        Dataset::new(
            (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect(),
            (0..10).map(|i| if i % 3 == 0 { Sign::Plus } else { Sign::Minus }).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn half_edge_is_perfect() {
        let d = data();
        let c = ConstantEdgeLearner::new(0.5).unwrap().train(&d, d.weights()).unwrap();
        let mut s = RandomStream::new(1, "t", 0);
        for n in 0..d.len() {
            for _ in 0..20 {
                assert_eq!(c.sample(d.x(n), &mut s), d.label(n));
            }
        }
    }

    #[test]
    fn empirical_rate() {
        let d = data();
        let c = ConstantEdgeLearner::new(0.124).unwrap().train(&d, d.weights()).unwrap();
        let mut s = RandomStream::new(3, "rate", 0);
        let trials = 100_000;
        let hits = (0..trials).filter(|i| c.sample(d.x(i % 10), &mut s) == d.label(i % 10)).count();
        assert!((hits as f64 / trials as f64 - 0.624).abs() < 0.01);
    }

    #[test]
    fn weighted_error_is_constant() {
        let d = data();
        let c = ConstantEdgeLearner::new(0.2).unwrap().train(&d, d.weights()).unwrap();
        let mut s = RandomStream::new(9, "w", 0);
        for _ in 0..20 {
            let w: Vec<f64> = (0..10).map(|_| s.uniform()).collect();
            let w = crate::data::normalize_weights(&w).unwrap();
            let err = weighted_expected_error(&c, &d, &w).unwrap();
            assert!((err - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn unseen_input_is_a_coin() {
        let d = data();
        let c = ConstantEdgeLearner::new(0.3).unwrap().train(&d, d.weights()).unwrap();
        assert_eq!(c.true_q(&[0.5, 0.5]), Some(0.5));
        assert!(ConstantEdgeLearner::new(0.0).is_err());
        assert!(ConstantEdgeLearner::new(0.6).is_err());
    }
}
