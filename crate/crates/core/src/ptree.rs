//! Boosted probabilistic decision trees.
//!
//! Every inner node holds one trained unit. The unit's sampled sign picks the
//! child, and the unit adds a score to `H(X)`: `+α_{s+}` or `−α_{s−}` for a
//! plain weak classifier, the inner score for a collected subtree. Each node
//! sees the whole dataset under its own weights `D_s`, and the leaf sum
//! `C(T) = Σ_l ∏_{s≤l} Z_s` bounds the expected exponential loss.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adaboost::{mc_loss, optimal_alphas, w_statistics, LossEstimate, WStats};
use crate::data::{stable_sum, Dataset, Sign};
use crate::error::{Error, Result};
use crate::matryoshka::CompositeNode;
use crate::path::PathIndex;
use crate::rng::RandomStream;
use crate::weak::{estimate_q, Classifier, ProbClassifier, QSource, WeakLearner};

/// Unnormalized child mass below which a branch is dead.
pub const DEAD_MASS: f64 = 1e-300;

/// Source of branch probabilities when enumerating outcomes.
#[derive(Debug, Clone, Copy)]
pub enum QRef<'a> {
    /// Training example `n`, read from the stored tables.
    Example(usize),
    /// Arbitrary input, using each classifier's `true_q`.
    Point(&'a [f64]),
}

/// What a unit can do on one input: route to `sign`, add `score`, with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub sign: Sign,
    pub score: f64,
    pub p: f64,
}

/// The trained content of an inner node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "unit", rename_all = "kebab-case")]
pub enum NodeUnit {
    Weak {
        classifier: Classifier,
        alpha_plus: f64,
        alpha_minus: f64,
        w: WStats,
        /// Training-time `q̂(+, X_n)` under the node's weights.
        q_plus: Vec<f64>,
        oracle_rounds: u64,
    },
    /// A collected subtree that passes its own score through.
    Composite(CompositeNode),
}

impl NodeUnit {
    /// A plain unit from a classifier and its branch probabilities.
    pub fn weak(classifier: Classifier, labels: &[Sign], weights: &[f64], q_plus: Vec<f64>, oracle_rounds: u64) -> Self {
        let w = w_statistics(labels, weights, &q_plus);
        let (alpha_plus, alpha_minus) = optimal_alphas(&w);
        NodeUnit::Weak { classifier, alpha_plus, alpha_minus, w, q_plus, oracle_rounds }
    }

    pub fn outcomes(&self, q: QRef) -> Result<Vec<Outcome>> {
        match self {
            NodeUnit::Weak { classifier, alpha_plus, alpha_minus, q_plus, .. } => {
                let p = match q {
                    QRef::Example(n) => *q_plus.get(n).ok_or_else(|| Error::Model(format!("no q entry for example {n}")))?,
                    QRef::Point(x) => classifier.true_q(x).ok_or(Error::ExactQUnavailable)?,
                };
                Ok(vec![
                    Outcome { sign: Sign::Plus, score: *alpha_plus, p },
                    Outcome { sign: Sign::Minus, score: -alpha_minus, p: 1.0 - p },
                ])
            }
            NodeUnit::Composite(c) => c.outcomes(q),
        }
    }

    /// One sampled `(sign, score)`.
    pub fn sample(&self, x: &[f64], stream: &mut RandomStream) -> (Sign, f64) {
        match self {
            NodeUnit::Weak { classifier, alpha_plus, alpha_minus, .. } => match classifier.sample(x, stream) {
                Sign::Plus => (Sign::Plus, *alpha_plus),
                Sign::Minus => (Sign::Minus, -alpha_minus),
            },
            NodeUnit::Composite(c) => {
                let (h, _) = c.inner.predict(x, stream);
                (Sign::of_score(h), h)
            }
        }
    }

    /// Raw weak-learner calls behind this unit.
    pub fn weak_learner_calls(&self) -> usize {
        match self {
            NodeUnit::Weak { classifier: Classifier::Composite(c), .. } => c.inner.weak_learner_calls(),
            NodeUnit::Weak { .. } => 1,
            NodeUnit::Composite(c) => c.inner.weak_learner_calls(),
        }
    }

    /// Nesting depth: 0 for a raw classifier.
    pub fn level(&self) -> u32 {
        match self {
            NodeUnit::Weak { classifier: Classifier::Composite(c), .. } => c.level,
            NodeUnit::Weak { .. } => 0,
            NodeUnit::Composite(c) => c.level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub unit: NodeUnit,
    pub z_plus: f64,
    pub z_minus: f64,
}

impl TreeNode {
    pub fn z(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Plus => self.z_plus,
            Sign::Minus => self.z_minus,
        }
    }
}

/// One row of the growth log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub step: usize,
    pub leaf: PathIndex,
    #[serde(rename = "Z_plus")]
    pub z_plus: f64,
    #[serde(rename = "Z_minus")]
    pub z_minus: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    nodes: BTreeMap<PathIndex, TreeNode>,
    /// `C(0), C(1), …`, one entry per added node.
    trajectory: Vec<f64>,
    log: Vec<GrowthStep>,
}

impl Default for TreeModel {
    fn default() -> Self {
        TreeModel { nodes: BTreeMap::new(), trajectory: vec![1.0], log: Vec::new() }
    }
}

impl TreeModel {
    pub fn nodes(&self) -> &BTreeMap<PathIndex, TreeNode> {
        &self.nodes
    }

    pub fn node(&self, path: &PathIndex) -> Option<&TreeNode> {
        self.nodes.get(path)
    }

    /// Number of inner nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn trajectory(&self) -> &[f64] {
        &self.trajectory
    }

    pub fn log(&self) -> &[GrowthStep] {
        &self.log
    }

    /// The recorded `C(T)`.
    pub fn bound(&self) -> f64 {
        *self.trajectory.last().unwrap_or(&1.0)
    }

    /// Leaves in shortlex order.
    pub fn leaves(&self) -> Vec<PathIndex> {
        if self.nodes.is_empty() {
            return vec![PathIndex::root()];
        }
        let mut leaves: Vec<PathIndex> = self
            .nodes
            .keys()
            .flat_map(|s| Sign::BOTH.map(|a| s.child(a)))
            .filter(|c| !self.nodes.contains_key(c))
            .collect();
        leaves.sort();
        leaves
    }

    pub fn is_leaf(&self, path: &PathIndex) -> bool {
        !self.nodes.contains_key(path)
            && match path.parent() {
                Ok(p) => self.nodes.contains_key(&p),
                Err(_) => true,
            }
    }

    /// `∏_{∅<s≤l} Z_s`.
    pub fn path_product(&self, path: &PathIndex) -> Result<f64> {
        let mut p = 1.0;
        for (k, sign) in path.signs().iter().enumerate() {
            let parent = PathIndex::from_signs(path.signs()[..k].to_vec());
            let node = self.nodes.get(&parent).ok_or_else(|| Error::Path(format!("`{path}` is not in the tree")))?;
            p *= node.z(*sign);
        }
        Ok(p)
    }

    /// `Σ_l ∏_{s≤l} Z_s`, recomputed from the node statistics.
    pub fn leaf_sum(&self) -> f64 {
        stable_sum(self.leaves().iter().map(|l| self.path_product(l).unwrap_or(0.0)))
    }

    /// `H_l = Σ_{∅<s≤l} α_s ṡ`.
    pub fn leaf_value(&self, path: &PathIndex) -> Result<f64> {
        if !self.nodes.contains_key(path) && !self.is_leaf(path) {
            return Err(Error::Path(format!("`{path}` is not in the tree")));
        }
        let mut h = 0.0;
        for (k, sign) in path.signs().iter().enumerate() {
            let parent = PathIndex::from_signs(path.signs()[..k].to_vec());
            match &self.nodes[&parent].unit {
                NodeUnit::Weak { alpha_plus, alpha_minus, .. } => {
                    h += match sign {
                        Sign::Plus => *alpha_plus,
                        Sign::Minus => -alpha_minus,
                    }
                }
                NodeUnit::Composite(_) => {
                    return Err(Error::Model(format!(
                        "node `{parent}` is a collected subtree; its score depends on the inner path"
                    )))
                }
            }
        }
        Ok(h)
    }

    /// Every complete walk `(leaf, H, probability)` for one input.
    pub fn trajectories(&self, q: QRef) -> Result<Vec<(PathIndex, f64, f64)>> {
        let mut out = Vec::new();
        self.collect_trajectories(PathIndex::root(), 0.0, 1.0, q, &mut out)?;
        Ok(out)
    }

    fn collect_trajectories(
        &self,
        at: PathIndex,
        h: f64,
        p: f64,
        q: QRef,
        out: &mut Vec<(PathIndex, f64, f64)>,
    ) -> Result<()> {
        match self.nodes.get(&at) {
            None => out.push((at, h, p)),
            Some(node) => {
                for o in node.unit.outcomes(q)? {
                    self.collect_trajectories(at.child(o.sign), h + o.score, p * o.p, q, out)?;
                }
            }
        }
        Ok(())
    }

    /// Reach probabilities `p(l, X)`.
    pub fn leaf_probabilities(&self, q: QRef) -> Result<BTreeMap<PathIndex, f64>> {
        let mut probs = BTreeMap::new();
        for (leaf, _, p) in self.trajectories(q)? {
            *probs.entry(leaf).or_insert(0.0) += p;
        }
        Ok(probs)
    }

    /// `E[e^{−H(X) y}]` for one input, by recursion over the outcomes.
    pub fn expected_exp_loss(&self, q: QRef, y: Sign) -> Result<f64> {
        self.expected_from(&PathIndex::root(), q, y.value())
    }

    fn expected_from(&self, at: &PathIndex, q: QRef, y: f64) -> Result<f64> {
        match self.nodes.get(at) {
            None => Ok(1.0),
            Some(node) => {
                let mut total = 0.0;
                for o in node.unit.outcomes(q)? {
                    if o.p > 0.0 {
                        total += o.p * (-o.score * y).exp() * self.expected_from(&at.child(o.sign), q, y)?;
                    }
                }
                Ok(total)
            }
        }
    }

    /// `Σ_n D(n) Σ_l p(l, X_n) e^{−H_l y_n}` by enumeration, from stored tables or exact q.
    pub fn exact_tree_bound(&self, data: &Dataset, exact: bool) -> Result<f64> {
        let terms = (0..data.len())
            .map(|n| {
                let q = if exact { QRef::Point(data.x(n)) } else { QRef::Example(n) };
                Ok(data.weights()[n] * self.expected_exp_loss(q, data.label(n))?)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(stable_sum(terms))
    }

    /// `Σ_n D(n) P(H(X_n) y_n ≤ 0)` over all trajectories; a zero score is an error.
    pub fn exact_misclassification(&self, data: &Dataset, exact: bool) -> Result<f64> {
        let terms = (0..data.len())
            .map(|n| {
                let q = if exact { QRef::Point(data.x(n)) } else { QRef::Example(n) };
                let y = data.label(n).value();
                let wrong = self.trajectories(q)?.into_iter().filter(|(_, h, _)| h * y <= 0.0).map(|(_, _, p)| p);
                Ok(data.weights()[n] * stable_sum(wrong))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(stable_sum(terms))
    }

    /// Walks from the root sampling each node; returns `H` and the leaf reached.
    pub fn predict(&self, x: &[f64], stream: &mut RandomStream) -> (f64, PathIndex) {
        let mut at = PathIndex::root();
        let mut h = 0.0;
        while let Some(node) = self.nodes.get(&at) {
            let (sign, score) = node.unit.sample(x, stream);
            h += score;
            at = at.child(sign);
        }
        (h, at)
    }

    /// Dimension-checked [`TreeModel::predict`].
    pub fn predict_checked(&self, x: &[f64], dim: usize, stream: &mut RandomStream) -> Result<(f64, PathIndex)> {
        if x.len() != dim {
            return Err(Error::Dimension { expected: dim, got: x.len() });
        }
        Ok(self.predict(x, stream))
    }

    pub fn weak_learner_calls(&self) -> usize {
        self.nodes.values().map(|n| n.unit.weak_learner_calls()).sum()
    }

    /// Deepest nesting level among the units, plus one.
    pub fn level(&self) -> u32 {
        1 + self.nodes.values().map(|n| n.unit.level()).max().unwrap_or(0)
    }
}

/// Both children of a split.
#[derive(Debug, Clone, PartialEq)]
pub struct Children {
    /// `None` when the branch is dead.
    pub plus: Option<Vec<f64>>,
    pub z_plus: f64,
    pub minus: Option<Vec<f64>>,
    pub z_minus: f64,
}

impl Children {
    pub fn z(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Plus => self.z_plus,
            Sign::Minus => self.z_minus,
        }
    }

    pub fn weights(&self, sign: Sign) -> Option<&Vec<f64>> {
        match sign {
            Sign::Plus => self.plus.as_ref(),
            Sign::Minus => self.minus.as_ref(),
        }
    }
}

fn split(unit: &NodeUnit, labels: &[Sign], weights: &[f64]) -> Result<Children> {
    let n = weights.len();
    let mut raw_plus = vec![0.0; n];
    let mut raw_minus = vec![0.0; n];
    for i in 0..n {
        let y = labels[i].value();
        for o in unit.outcomes(QRef::Example(i))? {
            let m = weights[i] * o.p * (-o.score * y).exp();
            match o.sign {
                Sign::Plus => raw_plus[i] += m,
                Sign::Minus => raw_minus[i] += m,
            }
        }
    }
    let finish = |raw: Vec<f64>| -> (Option<Vec<f64>>, f64) {
        let z = stable_sum(raw.iter().copied());
        if z < DEAD_MASS {
            (None, z)
        } else {
            (Some(raw.into_iter().map(|v| v / z).collect()), z)
        }
    };
    let (plus, z_plus) = finish(raw_plus);
    let (minus, z_minus) = finish(raw_minus);
    Ok(Children { plus, z_plus, minus, z_minus })
}

/// `D_{s±}(n) = D_s(n) q(s±, X_n) e^{∓α_{s±} y_n} / Z_{s±}` for a plain node.
pub fn children_weights(
    weights: &[f64],
    labels: &[Sign],
    q_plus: &[f64],
    alpha_plus: f64,
    alpha_minus: f64,
) -> Result<Children> {
    if weights.len() != labels.len() || weights.len() != q_plus.len() {
        return Err(Error::Dataset("weights, labels and q table differ in length".into()));
    }
    let unit = NodeUnit::Weak {
        classifier: Classifier::Stump(crate::weak::NoisyStump {
            feature: None,
            threshold: 0.0,
            polarity: Sign::Plus,
            p_flip: 0.0,
        }),
        alpha_plus,
        alpha_minus,
        w: WStats::default(),
        q_plus: q_plus.to_vec(),
        oracle_rounds: 0,
    };
    split(&unit, labels, weights)
}

/// Smoothed `(α_{s+}, α_{s−})` from the parent's weights.
pub fn node_alphas(labels: &[Sign], weights: &[f64], q_plus: &[f64]) -> (f64, f64) {
    optimal_alphas(&w_statistics(labels, weights, q_plus))
}

/// Trains the unit placed at a node.
pub trait UnitTrainer {
    /// `purpose` names the node uniquely so random streams do not collide.
    fn train_unit(&self, data: &Dataset, weights: &[f64], purpose: &str) -> Result<NodeUnit>;
}

/// Units made of one raw weak classifier each.
pub struct RawUnits<'a> {
    pub learner: &'a dyn WeakLearner,
    pub q_source: QSource,
    pub seed: u64,
}

impl UnitTrainer for RawUnits<'_> {
    fn train_unit(&self, data: &Dataset, weights: &[f64], purpose: &str) -> Result<NodeUnit> {
        let classifier = self.learner.train(data, weights)?;
        let (q, rounds) = estimate_q(&classifier, data, weights, &self.q_source, self.seed, purpose)?;
        Ok(NodeUnit::weak(classifier, data.labels(), weights, q, rounds))
    }
}

/// Growth state: the tree plus the weights at every node and live leaf.
pub(crate) struct Grower<'d> {
    pub(crate) data: &'d Dataset,
    pub(crate) tree: TreeModel,
    /// `D_s` for inner nodes and live leaves; dead leaves are absent.
    pub(crate) weights: BTreeMap<PathIndex, Vec<f64>>,
}

impl<'d> Grower<'d> {
    pub(crate) fn new(data: &'d Dataset, root_weights: Vec<f64>) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(PathIndex::root(), root_weights);
        Grower { data, tree: TreeModel::default(), weights }
    }

    /// The live leaf with the largest `∏Z`, first in shortlex order on ties.
    pub(crate) fn select_leaf(&self) -> Option<PathIndex> {
        let mut best: Option<(PathIndex, f64)> = None;
        for leaf in self.tree.leaves() {
            if !self.weights.contains_key(&leaf) {
                continue;
            }
            let p = self.tree.path_product(&leaf).unwrap_or(0.0);
            if best.as_ref().is_none_or(|(_, b)| p > *b) {
                best = Some((leaf, p));
            }
        }
        best.map(|(l, _)| l)
    }

    /// Installs `unit` at leaf `at` and applies `C(T+1) = C(T) + P_l (Z_{l+} + Z_{l−} − 1)`.
    pub(crate) fn add_node(&mut self, at: PathIndex, unit: NodeUnit) -> Result<()> {
        let product = self.tree.path_product(&at)?;
        self.place(at.clone(), unit)?;
        let node = &self.tree.nodes[&at];
        let c = self.tree.bound() + product * (node.z_plus + node.z_minus - 1.0);
        let step = self.tree.trajectory.len();
        self.tree.log.push(GrowthStep { step, leaf: at, z_plus: node.z_plus, z_minus: node.z_minus, c });
        self.tree.trajectory.push(c);
        Ok(())
    }

    /// Puts `unit` at `at` (a leaf, or a node whose subtree was just removed) and splits its weights.
    pub(crate) fn place(&mut self, at: PathIndex, unit: NodeUnit) -> Result<()> {
        let weights = self.weights.get(&at).ok_or_else(|| Error::Path(format!("`{at}` is not a live leaf")))?;
        let children = split(&unit, self.data.labels(), weights)?;
        for sign in Sign::BOTH {
            match children.weights(sign) {
                Some(w) => self.weights.insert(at.child(sign), w.clone()),
                None => self.weights.remove(&at.child(sign)),
            };
        }
        self.tree.nodes.insert(at, TreeNode { unit, z_plus: children.z_plus, z_minus: children.z_minus });
        Ok(())
    }

    /// Removes the subtree rooted at `at` and returns it re-rooted, with its own `C` history.
    pub(crate) fn detach(&mut self, at: &PathIndex, history: Vec<f64>) -> TreeModel {
        let inside: Vec<PathIndex> = self.tree.nodes.keys().filter(|p| at.is_prefix_of(p)).cloned().collect();
        let mut nodes = BTreeMap::new();
        for p in inside {
            let node = self.tree.nodes.remove(&p).expect("listed above");
            nodes.insert(p.strip_prefix(at).expect("prefix"), node);
        }
        self.weights.retain(|p, _| !at.is_prefix_of(p) || p == at);
        TreeModel { nodes, trajectory: history, log: Vec::new() }
    }

    pub(crate) fn finish(self) -> TreeModel {
        self.tree
    }
}

/// When growth stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_nodes: usize,
    /// Stop early once `C(T)` falls to this value.
    pub target_bound: Option<f64>,
}

impl StopRule {
    pub fn nodes(max_nodes: usize) -> Self {
        StopRule { max_nodes, target_bound: None }
    }

    /// `size` is whatever the caller budgets: inner nodes, or raw weak-learner calls.
    pub(crate) fn done(&self, size: usize, bound: f64) -> bool {
        size >= self.max_nodes || self.target_bound.is_some_and(|t| bound <= t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub stop: StopRule,
    pub q_source: QSource,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { stop: StopRule::nodes(8), q_source: QSource::default(), seed: 0 }
    }
}

pub(crate) fn node_purpose(prefix: &str, at: &PathIndex) -> String {
    format!("{prefix}/node/{at}")
}

/// Greedy growth with an arbitrary unit trainer, starting from `weights`.
pub(crate) fn grow_with(
    data: &Dataset,
    weights: Vec<f64>,
    trainer: &dyn UnitTrainer,
    stop: &StopRule,
    prefix: &str,
) -> Result<TreeModel> {
    let mut grower = Grower::new(data, weights);
    while !stop.done(grower.tree.len(), grower.tree.bound()) {
        let Some(leaf) = grower.select_leaf() else { break };
        let weights = grower.weights[&leaf].clone();
        let step = grower.tree.len() + 1;
        let unit = trainer
            .train_unit(data, &weights, &node_purpose(prefix, &leaf))
            .map_err(|e| Error::Learner { round: step, source: Box::new(e) })?;
        grower.add_node(leaf, unit)?;
    }
    Ok(grower.finish())
}

/// Grows a tree one weak classifier at a time at the leaf with the largest `∏Z`.
pub fn grow_tree(data: &Dataset, learner: &dyn WeakLearner, config: &TreeConfig) -> Result<TreeModel> {
    let trainer = RawUnits { learner, q_source: config.q_source, seed: config.seed };
    grow_with(data, data.weights().to_vec(), &trainer, &config.stop, "ptree")
}

/// Monte-Carlo weighted 0/1 loss of the tree.
pub fn mc_tree_misclassification(tree: &TreeModel, data: &Dataset, trials: usize, seed: u64) -> Result<LossEstimate> {
    mc_loss(data, trials, seed, "ptree/mc", |x, s| tree.predict(x, s).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{bound_f, rho_from_epsilon};
    use crate::weak::{ConstantEdgeLearner, NoisyStump, StumpLearner};

    fn stump(p_flip: f64) -> Classifier {
        Classifier::Stump(NoisyStump { feature: Some(0), threshold: 0.5, polarity: Sign::Plus, p_flip })
    }

    fn weak(alpha_plus: f64, alpha_minus: f64, q: Vec<f64>) -> NodeUnit {
        NodeUnit::Weak { classifier: stump(0.0), alpha_plus, alpha_minus, w: WStats::default(), q_plus: q, oracle_rounds: 0 }
    }

    fn path(s: &str) -> PathIndex {
        s.parse().unwrap()
    }

    fn tree_of(nodes: Vec<(&str, NodeUnit)>) -> TreeModel {
        let mut t = TreeModel::default();
        for (p, unit) in nodes {
            t.nodes.insert(path(p), TreeNode { unit, z_plus: 0.5, z_minus: 0.5 });
        }
        t
    }

    #[test]
    fn leaf_values_follow_edge_signs() {
        let t = tree_of(vec![
            ("", weak(0.4, 0.7, vec![])),
            ("+", weak(0.3, 0.1, vec![])),
            ("++", weak(0.2, 0.05, vec![])),
        ]);
        assert_eq!(t.leaf_value(&PathIndex::root()).unwrap(), 0.0);
        assert!((t.leaf_value(&path("++-")).unwrap() - (0.4 + 0.3 - 0.05)).abs() < 1e-15);
        assert_eq!(t.leaf_value(&path("-")).unwrap(), -0.7);
        assert!(t.leaf_value(&path("--+")).is_err());
    }

    #[test]
    fn children_weights_hand_example() {
        let ch = children_weights(&[0.5, 0.5], &[Sign::Plus, Sign::Minus], &[0.9, 0.2], 0.3, 0.0).unwrap();
        let (a, b) = (0.45 * (-0.3f64).exp(), 0.1 * 0.3f64.exp());
        assert!((ch.z_plus - (a + b)).abs() < 1e-15);
        assert!((ch.z_plus - 0.4683).abs() < 1e-4);
        let plus = ch.plus.unwrap();
        assert!((plus[0] - 0.7118).abs() < 1e-4);
        assert!((plus[1] - 0.2882).abs() < 1e-4);
    }

    #[test]
    fn symmetric_split_copies_parent() {
        let d = [0.1, 0.2, 0.3, 0.4];
        let labels = [Sign::Plus, Sign::Minus, Sign::Minus, Sign::Plus];
        let ch = children_weights(&d, &labels, &[0.5; 4], 0.0, 0.0).unwrap();
        assert_eq!(ch.z_plus, 0.5);
        assert_eq!(ch.z_minus, 0.5);
        for (a, b) in ch.plus.unwrap().iter().zip(d) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_split_is_crisp() {
        let labels = [Sign::Plus, Sign::Minus, Sign::Minus, Sign::Plus];
        let q = [1.0, 0.0, 1.0, 0.0];
        let ch = children_weights(&[0.25; 4], &labels, &q, 0.4, 0.9).unwrap();
        let (p, m) = (ch.plus.unwrap(), ch.minus.unwrap());
        for n in 0..4 {
            assert!((p[n] > 0.0) != (m[n] > 0.0));
        }
    }

    #[test]
    fn dead_branch_is_flagged() {
        let ch = children_weights(&[0.5, 0.5], &[Sign::Plus, Sign::Minus], &[1.0, 1.0], 0.3, 0.3).unwrap();
        assert!(ch.minus.is_none());
        assert_eq!(ch.z_minus, 0.0);
    }

    #[test]
    fn node_alphas_cases() {
        let labels = [Sign::Plus, Sign::Minus];
        let (ap, am) = node_alphas(&labels, &[0.5, 0.5], &[0.5, 0.5]);
        assert_eq!((ap, am), (0.0, 0.0));
        let ch = children_weights(&[0.5, 0.5], &labels, &[0.5, 0.5], ap, am).unwrap();
        assert_eq!(ch.z_plus + ch.z_minus, 1.0);

        let (ap, am) = node_alphas(&labels, &[0.5, 0.5], &[1.0, 0.0]);
        let ch = children_weights(&[0.5, 0.5], &labels, &[1.0, 0.0], ap, am).unwrap();
        assert!(ch.z_plus + ch.z_minus < 1e-3);
    }

    fn random_data(seed: u64, n: usize) -> Dataset {
        let mut s = RandomStream::new(seed, "tree-data", 0);
        let feats: Vec<Vec<f64>> = (0..n).map(|_| vec![s.uniform(), s.uniform()]).collect();
        let labels = feats
            .iter()
            .map(|x| if (x[0] - 0.5) * (x[1] - 0.5) + 0.1 * (s.uniform() - 0.5) > 0.0 { Sign::Plus } else { Sign::Minus })
            .collect();
        Dataset::new(feats, labels, None).unwrap()
    }

    #[test]
    fn grown_trees_satisfy_identities() {
        for seed in 0..3 {
            let data = random_data(seed, 40);
            let config = TreeConfig { stop: StopRule::nodes(10), seed, ..Default::default() };
            let tree = grow_tree(&data, &StumpLearner::default(), &config).unwrap();
            assert_eq!(tree.len(), 10);
            let exact = tree.exact_tree_bound(&data, false).unwrap();
            assert!((exact - tree.leaf_sum()).abs() < 1e-10);
            assert!((tree.bound() - tree.leaf_sum()).abs() < 1e-10);
            let traj = tree.trajectory();
            for step in tree.log() {
                let p = {
                    let mut t = tree.clone();
                    t.nodes.retain(|k, _| k != &step.leaf && !step.leaf.is_prefix_of(k) || k.depth() < step.leaf.depth());
                    t.path_product(&step.leaf).unwrap()
                };
                let expected = traj[step.step - 1] + p * (step.z_plus + step.z_minus - 1.0);
                assert_eq!(traj[step.step], expected);
            }
            for n in 0..data.len() {
                let probs = tree.leaf_probabilities(QRef::Point(data.x(n))).unwrap();
                assert!((probs.values().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn greedy_leaf_beats_average() {
        let data = random_data(11, 30);
        let mut grower = Grower::new(&data, data.weights().to_vec());
        let trainer = RawUnits { learner: &StumpLearner::default(), q_source: QSource::Exact, seed: 0 };
        for _ in 0..12 {
            let leaf = grower.select_leaf().unwrap();
            let p = grower.tree.path_product(&leaf).unwrap();
            let c = grower.tree.bound();
            assert!(p >= c / (grower.tree.len() + 1) as f64 - 1e-15);
            let w = grower.weights[&leaf].clone();
            let unit = trainer.train_unit(&data, &w, "t").unwrap();
            grower.add_node(leaf, unit).unwrap();
        }
    }

    #[test]
    fn constant_edge_growth_stays_under_f() {
        let data = random_data(5, 24);
        for eps in [0.1, 0.3] {
            let rho = rho_from_epsilon(eps).unwrap();
            let learner = ConstantEdgeLearner::new(eps).unwrap();
            let config = TreeConfig { stop: StopRule::nodes(32), q_source: QSource::Exact, seed: 0 };
            let tree = grow_tree(&data, &learner, &config).unwrap();
            assert!((tree.trajectory()[1] - (tree.node(&PathIndex::root()).unwrap().z_plus + tree.node(&PathIndex::root()).unwrap().z_minus)).abs() < 1e-15);
            for (t, c) in tree.trajectory().iter().enumerate().skip(1) {
                assert!(*c <= bound_f(t as f64, rho).unwrap() + 1e-9, "T={t}: {c}");
            }
        }
    }

    #[test]
    fn separable_data_collapses_after_first_split() {
        let data = Dataset::new(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![Sign::Minus, Sign::Minus, Sign::Plus, Sign::Plus],
            None,
        )
        .unwrap();
        let config = TreeConfig { stop: StopRule::nodes(1), q_source: QSource::Exact, seed: 0 };
        let tree = grow_tree(&data, &StumpLearner::new(0.0).unwrap(), &config).unwrap();
        assert!(tree.bound() < 1e-3);
    }

    #[test]
    fn root_only_tree() {
        let t = TreeModel::default();
        let data = random_data(1, 5);
        assert_eq!(t.exact_tree_bound(&data, true).unwrap(), 1.0);
        let mut s = RandomStream::new(0, "p", 0);
        assert_eq!(t.predict(&[0.0, 0.0], &mut s), (0.0, PathIndex::root()));
        assert_eq!(t.leaves(), vec![PathIndex::root()]);
    }

    #[test]
    fn single_split_enumeration_equals_z_sum() {
        let data = Dataset::new(vec![vec![0.0], vec![1.0]], vec![Sign::Plus, Sign::Minus], None).unwrap();
        let mut g = Grower::new(&data, data.weights().to_vec());
        g.add_node(PathIndex::root(), weak(0.3, 0.6, vec![0.9, 0.2])).unwrap();
        let t = g.finish();
        let ch = children_weights(data.weights(), data.labels(), &[0.9, 0.2], 0.3, 0.6).unwrap();
        let exact = t.exact_tree_bound(&data, false).unwrap();
        assert!((exact - (ch.z_plus + ch.z_minus)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_nodes_give_deterministic_paths() {
        let data = random_data(8, 30);
        let config = TreeConfig { stop: StopRule::nodes(5), q_source: QSource::Exact, seed: 0 };
        let tree = grow_tree(&data, &StumpLearner::new(0.0).unwrap(), &config).unwrap();
        let mut s = RandomStream::new(1, "walk", 0);
        for n in 0..data.len() {
            let (h, leaf) = tree.predict(data.x(n), &mut s);
            assert_eq!(tree.predict(data.x(n), &mut s).1, leaf);
            assert!((h - tree.leaf_value(&leaf).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn growth_is_deterministic() {
        let data = random_data(3, 30);
        let config = TreeConfig { stop: StopRule::nodes(6), seed: 4, ..Default::default() };
        let a = grow_tree(&data, &StumpLearner::default(), &config).unwrap();
        let b = grow_tree(&data, &StumpLearner::default(), &config).unwrap();
        assert_eq!(a, b);
    }
}
