use serde::{Deserialize, Serialize};

use super::{Classifier, ProbClassifier, WeakLearner};
use crate::data::{Dataset, Sign};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Decision stump whose output is flipped with probability `p_flip`.
///
/// With `feature == None` the stump is a constant predictor of `polarity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyStump {
    pub feature: Option<usize>,
    pub threshold: f64,
    /// Output for `x[feature] > threshold`.
    pub polarity: Sign,
    pub p_flip: f64,
}

impl NoisyStump {
    /// The noiseless decision.
    pub fn decide(&self, x: &[f64]) -> Sign {
        match self.feature {
            Some(f) if x[f] > self.threshold => self.polarity,
            Some(_) => self.polarity.flip(),
            None => self.polarity,
        }
    }
}

impl ProbClassifier for NoisyStump {
    fn sample(&self, x: &[f64], stream: &mut RandomStream) -> Sign {
        let d = self.decide(x);
        if stream.bernoulli(self.p_flip) {
            d.flip()
        } else {
            d
        }
    }

    fn true_q(&self, x: &[f64]) -> Option<f64> {
        Some(match self.decide(x) {
            Sign::Plus => 1.0 - self.p_flip,
            Sign::Minus => self.p_flip,
        })
    }
}

/// Exhaustive stump search over midpoints of sorted feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct StumpLearner {
    p_flip: f64,
}

impl Default for StumpLearner {
    fn default() -> Self {
        StumpLearner { p_flip: 0.1 }
    }
}

impl StumpLearner {
    pub fn new(p_flip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_flip) {
            return Err(Error::Config(format!("p_flip must lie in [0, 1], got {p_flip}")));
        }
        Ok(StumpLearner { p_flip })
    }

    pub fn p_flip(&self) -> f64 {
        self.p_flip
    }

    /// Best noiseless stump and its weighted error.
    pub fn fit(&self, data: &Dataset, weights: &[f64]) -> (NoisyStump, f64) {
        let n = data.len();
        let total_plus: f64 = (0..n).filter(|&i| data.label(i) == Sign::Plus).map(|i| weights[i]).sum();
        let total_minus: f64 = (0..n).filter(|&i| data.label(i) == Sign::Minus).map(|i| weights[i]).sum();

        let mut best: Option<(NoisyStump, f64)> = None;
        let mut order: Vec<usize> = (0..n).collect();
        for f in 0..data.dim() {
            order.sort_by(|&a, &b| data.x(a)[f].total_cmp(&data.x(b)[f]));
            let (mut left_plus, mut left_minus) = (0.0, 0.0);
            for k in 0..n - 1 {
                let i = order[k];
                match data.label(i) {
                    Sign::Plus => left_plus += weights[i],
                    Sign::Minus => left_minus += weights[i],
                }
                let (lo, hi) = (data.x(i)[f], data.x(order[k + 1])[f]);
                if lo == hi {
                    continue;
                }
                let threshold = lo + (hi - lo) / 2.0;
                let candidates = [
                    (Sign::Plus, left_plus + (total_minus - left_minus)),
                    (Sign::Minus, left_minus + (total_plus - left_plus)),
                ];
                for (polarity, err) in candidates {
                    if best.as_ref().is_none_or(|(_, e)| err < *e) {
                        let stump = NoisyStump { feature: Some(f), threshold, polarity, p_flip: self.p_flip };
                        best = Some((stump, err));
                    }
                }
            }
        }
        best.unwrap_or_else(|| {
            // every feature is constant: weighted-majority label
            let polarity = if total_plus >= total_minus { Sign::Plus } else { Sign::Minus };
            let err = total_plus.min(total_minus);
            (NoisyStump { feature: None, threshold: 0.0, polarity, p_flip: self.p_flip }, err)
        })
    }
}

impl WeakLearner for StumpLearner {
    fn train(&self, data: &Dataset, weights: &[f64]) -> Result<Classifier> {
        Ok(Classifier::Stump(self.fit(data, weights).0))
    }

    fn describe(&self) -> String {
        format!("stump(p_flip={})", self.p_flip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak::weighted_expected_error;

    // every split `x[f] > v` at an observed value v below the maximum, both polarities
    fn brute_force_error(data: &Dataset, weights: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for f in 0..data.dim() {
            let values: Vec<f64> = data.features().iter().map(|x| x[f]).collect();
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for &t in values.iter().filter(|v| **v < max) {
                for polarity in Sign::BOTH {
                    let err: f64 = (0..data.len())
                        .filter(|&n| {
                            let d = if data.x(n)[f] > t { polarity } else { polarity.flip() };
                            d != data.label(n)
                        })
                        .map(|n| weights[n])
                        .sum();
                    best = best.min(err);
                }
            }
        }
        best
    }

    #[test]
    fn separable_one_dimensional() {
        let data = Dataset::new(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![Sign::Minus, Sign::Minus, Sign::Plus, Sign::Plus],
            None,
        )
        .unwrap();
        let learner = StumpLearner::new(0.0).unwrap();
        let (stump, err) = learner.fit(&data, data.weights());
        assert_eq!(err, 0.0);
        assert_eq!(stump.threshold, 1.5);
        assert_eq!(weighted_expected_error(&stump, &data, data.weights()), Some(0.0));

        let noisy = StumpLearner::new(0.1).unwrap().fit(&data, data.weights()).0;
        for n in 0..data.len() {
            let q = noisy.true_q(data.x(n)).unwrap();
            let correct = if data.label(n) == Sign::Plus { q } else { 1.0 - q };
            assert!((correct - 0.9).abs() < 1e-15);
        }
    }

    #[test]
    fn xor_best_error_matches_brute_force() {
        let data = Dataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![Sign::Minus, Sign::Minus, Sign::Plus, Sign::Plus],
            None,
        )
        .unwrap();
        let (_, err) = StumpLearner::default().fit(&data, data.weights());
        let oracle = brute_force_error(&data, data.weights());
        assert_eq!(oracle, 0.5);
        assert_eq!(err, oracle);
    }

    #[test]
    fn degenerate_feature_falls_back_to_majority() {
        let data = Dataset::new(
            vec![vec![1.0], vec![1.0], vec![1.0]],
            vec![Sign::Minus, Sign::Plus, Sign::Minus],
            Some(vec![0.2, 0.5, 0.3]),
        )
        .unwrap();
        let (stump, err) = StumpLearner::default().fit(&data, data.weights());
        assert_eq!(stump.feature, None);
        assert_eq!(stump.polarity, Sign::Plus);
        assert!((err - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_on_random_data() {
        let mut s = RandomStream::new(5, "stump-test", 0);
        for _ in 0..50 {
            let n = 2 + (s.uniform() * 20.0) as usize;
            let feats: Vec<Vec<f64>> =
                (0..n).map(|_| vec![(s.uniform() * 5.0).floor(), s.uniform()]).collect();
            let labels: Vec<Sign> = (0..n).map(|_| if s.bernoulli(0.5) { Sign::Plus } else { Sign::Minus }).collect();
            let w: Vec<f64> = (0..n).map(|_| s.uniform() + 0.01).collect();
            let data = Dataset::new(feats, labels, Some(w)).unwrap();
            let (_, err) = StumpLearner::default().fit(&data, data.weights());
            let oracle = brute_force_error(&data, data.weights());
            if oracle.is_finite() {
                assert!((err - oracle).abs() < 1e-12);
            }
        }
    }
}
