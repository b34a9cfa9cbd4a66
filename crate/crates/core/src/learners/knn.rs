use serde::{Deserialize, Serialize};

use super::{argmax_first, Classifier};
use crate::data::{Dataset, Instance, Value};

/// k-nearest-neighbour model; keeps every training instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnModel {
    pub k: usize,
    pub class_count: usize,
    pub stored: Vec<Instance>,
}

/// Squared distance: numeric features add `(a - b)^2`, categorical features
/// add 0 when equal and 1 otherwise, a missing value on either side adds 1.
pub fn instance_distance(a: &Instance, b: &Instance) -> f64 {
    a.features
        .iter()
        .zip(&b.features)
        .map(|(x, y)| match (x, y) {
            (Some(Value::Numeric(p)), Some(Value::Numeric(q))) => (p - q) * (p - q),
            (Some(Value::Category(p)), Some(Value::Category(q))) => f64::from(u8::from(p != q)),
            _ => 1.0,
        })
        .sum()
}

impl NnModel {
    pub fn train(ds: &Dataset, k: usize) -> Self {
        NnModel {
            k,
            class_count: ds.class_count(),
            stored: ds.instances().to_vec(),
        }
    }
}

impl Classifier for NnModel {
    fn classify(&self, x: &Instance) -> usize {
        if self.k == 1 {
            // Strict `<` keeps the earliest stored instance on ties.
            let mut best = (f64::INFINITY, 0usize);
            for s in &self.stored {
                let d = instance_distance(x, s);
                if d < best.0 {
                    best = (d, s.label);
                }
            }
            return best.1;
        }
        let mut dists: Vec<(f64, usize)> = self
            .stored
            .iter()
            .enumerate()
            .map(|(i, s)| (instance_distance(x, s), i))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; self.class_count];
        for &(_, i) in dists.iter().take(self.k) {
            votes[self.stored[i].label] += 1;
        }
        argmax_first(&votes)
    }
}
