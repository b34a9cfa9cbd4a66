//! The three base learners behind one interface.
//!
//! A [`LearnerSpec`] names an algorithm and its hyperparameters; training it
//! on a [`Dataset`] produces an immutable [`Model`]. Training is a pure
//! function of `(dataset, spec, seed)`.

mod knn;
mod linear;
mod tree;

pub use knn::{instance_distance, NnModel};
pub use linear::{FeatureEncoder, LinearMachine, ThermalSchedule};
pub use tree::{
    best_cut_point, best_cut_point_values, gain_ratio, pessimistic_error_bound, BranchTest, Node,
    TreeModel,
};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Instance};
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Anything that maps an instance to a class index.
pub trait Classifier {
    fn classify(&self, x: &Instance) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    DecisionTree,
    NearestNeighbor,
    LinearMachine,
}

pub const DEFAULT_PRUNING_CONFIDENCE: f64 = 0.10;
pub const DEFAULT_MIN_NODE_INSTANCES: usize = 2;
pub const DEFAULT_RESTARTS: usize = 10;

fn default_confidence() -> f64 {
    DEFAULT_PRUNING_CONFIDENCE
}
fn default_min_node() -> usize {
    DEFAULT_MIN_NODE_INSTANCES
}
fn default_k() -> usize {
    1
}
fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    DecisionTree {
        #[serde(default = "default_confidence")]
        pruning_confidence: f64,
        #[serde(default = "default_min_node")]
        min_node_instances: usize,
    },
    NearestNeighbor {
        #[serde(default = "default_k")]
        k: usize,
    },
    LinearMachine {
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default)]
        schedule: ThermalSchedule,
    },
}

impl LearnerSpec {
    pub fn decision_tree() -> Self {
        LearnerSpec::DecisionTree {
            pruning_confidence: DEFAULT_PRUNING_CONFIDENCE,
            min_node_instances: DEFAULT_MIN_NODE_INSTANCES,
        }
    }

    pub fn nearest_neighbor() -> Self {
        LearnerSpec::NearestNeighbor { k: 1 }
    }

    pub fn linear_machine() -> Self {
        LearnerSpec::LinearMachine {
            restarts: DEFAULT_RESTARTS,
            schedule: ThermalSchedule::default(),
        }
    }

    /// Decision tree, 1-NN and linear machine with default parameters.
    pub fn default_trio() -> Vec<LearnerSpec> {
        vec![
            Self::decision_tree(),
            Self::nearest_neighbor(),
            Self::linear_machine(),
        ]
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerSpec::DecisionTree { .. } => LearnerKind::DecisionTree,
            LearnerSpec::NearestNeighbor { .. } => LearnerKind::NearestNeighbor,
            LearnerSpec::LinearMachine { .. } => LearnerKind::LinearMachine,
        }
    }

    /// Short label used in report tables.
    pub fn label(&self) -> String {
        match self {
            LearnerSpec::DecisionTree { .. } => "D-Tree".to_string(),
            LearnerSpec::NearestNeighbor { k } => format!("{k}-NN"),
            LearnerSpec::LinearMachine { .. } => "LM".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::DecisionTree {
                pruning_confidence,
                min_node_instances,
            } => {
                if !(*pruning_confidence > 0.0 && *pruning_confidence < 1.0) {
                    return Err(Error::invalid("pruning confidence must lie in (0,1)"));
                }
                if *min_node_instances < 2 {
                    return Err(Error::invalid("a test node needs at least two instances"));
                }
            }
            LearnerSpec::NearestNeighbor { k } => {
                if *k == 0 {
                    return Err(Error::invalid("k must be at least 1"));
                }
            }
            LearnerSpec::LinearMachine { restarts, schedule } => {
                if *restarts == 0 {
                    return Err(Error::invalid("linear machine needs at least one restart"));
                }
                schedule.validate()?;
            }
        }
        Ok(())
    }

    pub fn train(&self, ds: &Dataset, seed: Seed) -> Result<Model> {
        self.validate()?;
        if ds.is_empty() {
            return Err(Error::NoInstances);
        }
        Ok(match self {
            LearnerSpec::DecisionTree {
                pruning_confidence,
                min_node_instances,
            } => Model::Tree(TreeModel::train(
                ds,
                *pruning_confidence,
                *min_node_instances,
            )),
            LearnerSpec::NearestNeighbor { k } => Model::NearestNeighbor(NnModel::train(ds, *k)),
            LearnerSpec::LinearMachine { restarts, schedule } => {
                Model::Linear(LinearMachine::train(ds, *restarts, schedule, seed))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Tree(TreeModel),
    NearestNeighbor(NnModel),
    Linear(LinearMachine),
}

impl Model {
    pub fn as_tree(&self) -> Option<&TreeModel> {
        match self {
            Model::Tree(t) => Some(t),
            _ => None,
        }
    }

    /// Debug dump as JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }
}

impl Classifier for Model {
    fn classify(&self, x: &Instance) -> usize {
        match self {
            Model::Tree(m) => m.classify(x),
            Model::NearestNeighbor(m) => m.classify(x),
            Model::Linear(m) => m.classify(x),
        }
    }
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax_first<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parses_with_defaults() {
        let s: LearnerSpec = toml::from_str("kind = \"decision_tree\"").unwrap();
        assert_eq!(s, LearnerSpec::decision_tree());
        let s: LearnerSpec = toml::from_str("kind = \"linear_machine\"").unwrap();
        assert_eq!(s, LearnerSpec::linear_machine());
        let s: LearnerSpec = toml::from_str("kind = \"nearest_neighbor\"\nk = 5").unwrap();
        assert_eq!(s.label(), "5-NN");
    }

    #[test]
    fn validation() {
        assert!(LearnerSpec::NearestNeighbor { k: 0 }.validate().is_err());
        assert!(LearnerSpec::DecisionTree {
            pruning_confidence: 1.0,
            min_node_instances: 2
        }
        .validate()
        .is_err());
        assert!(LearnerSpec::LinearMachine {
            restarts: 0,
            schedule: ThermalSchedule::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn argmax_ties_to_first() {
        assert_eq!(argmax_first(&[0.2, 0.9, 0.1]), 1);
        assert_eq!(argmax_first(&[0.5, 0.5]), 0);
        assert_eq!(argmax_first(&[1, 3, 3]), 1);
    }
}
