//! Probabilistic boosting with exact training-error bounds.
//!
//! Weak classifiers here are Bernoulli oracles. The crate trains probabilistic
//! AdaBoost ([`adaboost`]), boosted probabilistic decision trees ([`ptree`])
//! and nested matryoshka trees ([`matryoshka`]), and evaluates the closed-form
//! bounds of all three ([`bounds`]).

pub mod adaboost;
pub mod bounds;
pub mod data;
pub mod error;
pub mod figures;
pub mod matryoshka;
pub mod model;
pub mod path;
pub mod ptree;
pub mod rng;
pub mod specfun;
pub mod weak;

pub use adaboost::{train_adaboost, AdaboostModel, BoostConfig, Strategy};
pub use data::{Dataset, Sign};
pub use error::{Error, Result};
pub use matryoshka::{build_fixed_2_matryoshka, build_greedy_matryoshka, CompositeNode, CompositeScoring, MatryoshkaConfig};
pub use model::{Metadata, Model, ModelRecord};
pub use path::PathIndex;
pub use ptree::{grow_tree, StopRule, TreeConfig, TreeModel};
pub use rng::RandomStream;
pub use weak::{ProbClassifier, WeakLearner};
