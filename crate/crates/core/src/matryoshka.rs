//! Matryoshka trees: trees whose nodes are collected trees.
//!
//! A collected subtree becomes a [`CompositeNode`]. Sampling it walks the inner
//! tree; the sign of the inner score `H` (ties to `+`) picks the outer branch.
//! Under [`CompositeScoring::Inherited`] the outer node adds the inner score
//! itself, so the composite's `Z_{s+} + Z_{s−}` equals the inner tree's bound.
//! Under [`CompositeScoring::Refit`] the composite is treated as an ordinary
//! Bernoulli classifier and gets fresh alphas from its `q`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::{rate_matryoshka, rate_simple};
use crate::data::{stable_sum, Dataset, Sign};
use crate::error::{Error, Result};
use crate::path::PathIndex;
use crate::ptree::{grow_with, node_purpose, Grower, NodeUnit, Outcome, QRef, RawUnits, StopRule, TreeModel, UnitTrainer};
use crate::rng::RandomStream;
use crate::weak::{estimate_q, Classifier, ProbClassifier, QSource, Stopwatch, WeakLearner};

/// A trained subtree used as a single probabilistic node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeNode {
    /// 1 when the inner tree holds raw classifiers.
    pub level: u32,
    pub inner: TreeModel,
}

impl CompositeNode {
    /// One outcome per inner trajectory, routed by `sign(H)`.
    pub fn outcomes(&self, q: QRef) -> Result<Vec<Outcome>> {
        Ok(self
            .inner
            .trajectories(q)?
            .into_iter()
            .filter(|(_, _, p)| *p > 0.0)
            .map(|(_, h, p)| Outcome { sign: Sign::of_score(h), score: h, p })
            .collect())
    }
}

impl ProbClassifier for CompositeNode {
    fn sample(&self, x: &[f64], stream: &mut RandomStream) -> Sign {
        Sign::of_score(self.inner.predict(x, stream).0)
    }

    fn true_q(&self, x: &[f64]) -> Option<f64> {
        exact_composite_q(self, x).ok()
    }
}

/// Wraps a trained tree as a composite node.
pub fn collect_leaves(subtree: TreeModel) -> CompositeNode {
    CompositeNode { level: subtree.level(), inner: subtree }
}

/// `P(H_inner(x) ≥ 0)` by enumerating the inner trajectories.
pub fn exact_composite_q(composite: &CompositeNode, x: &[f64]) -> Result<f64> {
    let plus = composite
        .inner
        .trajectories(QRef::Point(x))?
        .into_iter()
        .filter(|(_, h, _)| Sign::of_score(*h) == Sign::Plus)
        .map(|(_, _, p)| p);
    Ok(stable_sum(plus).min(1.0))
}

/// How a collected subtree scores at its outer position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositeScoring {
    /// The outer node adds the inner score `H`.
    #[default]
    Inherited,
    /// The composite is a plain Bernoulli classifier with refit alphas.
    Refit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatryoshkaConfig {
    pub q_source: QSource,
    pub seed: u64,
    pub scoring: CompositeScoring,
}

impl Default for MatryoshkaConfig {
    fn default() -> Self {
        MatryoshkaConfig { q_source: QSource::default(), seed: 0, scoring: CompositeScoring::Inherited }
    }
}

fn wrap(
    inner: TreeModel,
    data: &Dataset,
    weights: &[f64],
    config: &MatryoshkaConfig,
    purpose: &str,
) -> Result<NodeUnit> {
    let composite = collect_leaves(inner);
    match config.scoring {
        CompositeScoring::Inherited => Ok(NodeUnit::Composite(composite)),
        CompositeScoring::Refit => {
            let classifier = Classifier::Composite(Box::new(composite));
            let (q, rounds) =
                estimate_q(&classifier, data, weights, &config.q_source, config.seed, &format!("{purpose}/q"))?;
            Ok(NodeUnit::weak(classifier, data.labels(), weights, q, rounds))
        }
    }
}

struct LevelUnits<'a> {
    learner: &'a dyn WeakLearner,
    config: &'a MatryoshkaConfig,
    /// Level of the units this trainer produces; 0 means raw classifiers.
    level: u32,
}

impl UnitTrainer for LevelUnits<'_> {
    fn train_unit(&self, data: &Dataset, weights: &[f64], purpose: &str) -> Result<NodeUnit> {
        if self.level == 0 {
            let raw = RawUnits { learner: self.learner, q_source: self.config.q_source, seed: self.config.seed };
            return raw.train_unit(data, weights, purpose);
        }
        let below = LevelUnits { learner: self.learner, config: self.config, level: self.level - 1 };
        let prefix = format!("{purpose}/L{}", self.level);
        let inner = grow_with(data, weights.to_vec(), &below, &StopRule::nodes(2), &prefix)?;
        wrap(inner, data, weights, self.config, purpose)
    }
}

/// Two-node trees nested `levels` deep; `2^levels` raw weak-learner calls.
pub fn build_fixed_2_matryoshka(
    data: &Dataset,
    learner: &dyn WeakLearner,
    levels: u32,
    config: &MatryoshkaConfig,
) -> Result<TreeModel> {
    if levels == 0 {
        return Err(Error::Config("matryoshka needs at least one level".into()));
    }
    if levels > 30 {
        return Err(Error::Config(format!("{levels} levels is beyond any feasible budget")));
    }
    let units = LevelUnits { learner, config, level: levels - 1 };
    grow_with(data, data.weights().to_vec(), &units, &StopRule::nodes(2), "ptree")
}

/// Units of greedy decrease rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateBasis {
    #[default]
    PerNode,
    PerSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuildAction {
    Grow,
    Collect,
}

/// One row of the greedy build log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildStep {
    pub step: usize,
    pub subtree: PathIndex,
    pub action: BuildAction,
    /// Outer bound after the action.
    #[serde(rename = "C")]
    pub c: f64,
    /// Nodes in `subtree` when the action was decided.
    #[serde(rename = "T")]
    pub t: usize,
    pub rate_simple: Option<f64>,
    pub rate_matryoshka: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyBuild {
    pub tree: TreeModel,
    pub log: Vec<BuildStep>,
}

/// Decrease rates of one subtree; `None` when it cannot be collected.
pub fn subtree_rates(history: &[f64], seconds_last: f64, seconds_mean: f64, basis: RateBasis) -> Option<(f64, f64)> {
    let k = history.len().checked_sub(1)?;
    if k < 2 {
        return None;
    }
    let simple = rate_simple(history[k - 2], history[k]);
    let matryoshka = rate_matryoshka(history[k], k as f64).ok()?;
    Some(match basis {
        RateBasis::PerNode => (simple, matryoshka),
        RateBasis::PerSecond => (
            simple / seconds_last.max(f64::MIN_POSITIVE),
            matryoshka / seconds_mean.max(f64::MIN_POSITIVE),
        ),
    })
}

/// Bound of the subtree rooted at `root`, relative to its own root.
fn subtree_bound(tree: &TreeModel, root: &PathIndex) -> f64 {
    let terms = tree.leaves().into_iter().filter(|l| root.is_prefix_of(l)).map(|l| {
        let mut p = 1.0;
        for k in root.depth()..l.depth() {
            let parent = PathIndex::from_signs(l.signs()[..k].to_vec());
            p *= tree.node(&parent).map_or(0.0, |n| n.z(l.signs()[k]));
        }
        p
    });
    stable_sum(terms)
}

/// Grows like a plain tree and, after each addition, collects the first
/// enclosing subtree (scanning from the root) whose matryoshka rate beats its
/// simple rate.
pub fn build_greedy_matryoshka(
    data: &Dataset,
    learner: &dyn WeakLearner,
    stop: &StopRule,
    basis: RateBasis,
    config: &MatryoshkaConfig,
    stopwatch: &dyn Stopwatch,
) -> Result<GreedyBuild> {
    let raw = RawUnits { learner, q_source: config.q_source, seed: config.seed };
    let mut grower = Grower::new(data, data.weights().to_vec());
    // C history of the subtree rooted at each node, and seconds spent per node
    let mut history: BTreeMap<PathIndex, Vec<f64>> = BTreeMap::new();
    let mut seconds: BTreeMap<PathIndex, f64> = BTreeMap::new();
    let mut log = Vec::new();
    let mut collections = 0usize;

    while !stop.done(grower.tree.weak_learner_calls(), grower.tree.bound()) {
        let Some(leaf) = grower.select_leaf() else { break };
        let step = log.len() + 1;
        let weights = grower.weights[&leaf].clone();
        let start = stopwatch.now();
        let purpose = node_purpose(&format!("greedy/c{collections}"), &leaf);
        let unit = raw
            .train_unit(data, &weights, &purpose)
            .map_err(|e| Error::Learner { round: step, source: Box::new(e) })?;
        grower.add_node(leaf.clone(), unit)?;
        seconds.insert(leaf.clone(), stopwatch.now() - start);
        history.insert(leaf.clone(), vec![1.0]);
        for r in leaf.ancestors().chain(std::iter::once(leaf.clone())) {
            let c = subtree_bound(&grower.tree, &r);
            history.get_mut(&r).expect("every node has a history").push(c);
        }
        log.push(BuildStep {
            step,
            subtree: leaf.clone(),
            action: BuildAction::Grow,
            c: grower.tree.bound(),
            t: grower.tree.len(),
            rate_simple: None,
            rate_matryoshka: None,
        });

        let mut scan: Vec<PathIndex> = leaf.ancestors().collect();
        scan.sort_by_key(|p| p.depth());
        for r in scan {
            let inside: Vec<&PathIndex> = grower.tree.nodes().keys().filter(|p| r.is_prefix_of(p)).collect();
            let total: f64 = inside.iter().map(|p| seconds.get(*p).copied().unwrap_or(0.0)).sum();
            let mean = total / inside.len() as f64;
            let Some((simple, matryoshka)) = subtree_rates(&history[&r], seconds[&leaf], mean, basis) else {
                continue;
            };
            if matryoshka < simple {
                let t = inside.len();
                let inner_history = history[&r].clone();
                let inner = grower.detach(&r, inner_history);
                let inner_c = inner.bound();
                history.retain(|p, _| !r.is_prefix_of(p) || *p == r);
                seconds.retain(|p, _| !r.is_prefix_of(p) || *p == r);
                seconds.insert(r.clone(), total);
                let weights = grower.weights[&r].clone();
                let unit = wrap(inner, data, &weights, config, &format!("{purpose}/collect"))?;
                grower.place(r.clone(), unit)?;
                history.insert(r.clone(), vec![1.0, inner_c]);
                collections += 1;
                log.push(BuildStep {
                    step: log.len() + 1,
                    subtree: r,
                    action: BuildAction::Collect,
                    c: grower.tree.leaf_sum(),
                    t,
                    rate_simple: Some(simple),
                    rate_matryoshka: Some(matryoshka),
                });
                break;
            }
        }
    }
    Ok(GreedyBuild { tree: grower.finish(), log })
}
