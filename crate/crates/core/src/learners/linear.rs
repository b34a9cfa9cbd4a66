//! Linear machine: one discriminant `g_i(Y) = W_i . Y` per class, where `Y`
//! is the encoded instance with a constant 1 in slot 0.
//!
//! Training runs an annealed error-correction procedure several times under
//! different instance orderings and keeps the machine whose predictions
//! have the highest gain ratio against the training labels.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tree::gain_ratio;
use super::{argmax_first, Classifier};
use crate::data::{Dataset, FeatureKind, Instance, Value};
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Temperature schedule for thermal training.
///
/// On a mistake (true class `i`, predicted `j`) with temperature `t`, the
/// correction is `W_i += c Y`, `W_j -= c Y` where `c = t^2 / (t + k)` and
/// `k = (W_j - W_i) . Y / (2 Y . Y)` is the correction that would exactly
/// tie the two discriminants. `t` is multiplied by `decay` after every
/// presentation; training stops once `t <= floor` or after a pass with no
/// mistakes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSchedule {
    pub initial_temperature: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for ThermalSchedule {
    fn default() -> Self {
        ThermalSchedule {
            initial_temperature: 2.0,
            decay: 0.999,
            floor: 0.001,
        }
    }
}

impl ThermalSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::invalid("temperature decay must lie in (0,1)"));
        }
        if !(self.floor > 0.0 && self.floor < self.initial_temperature) {
            return Err(Error::invalid("temperature floor must lie in (0, initial)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Slot {
    /// Missing values take the training mean.
    Numeric { mean: f64 },
    /// One-of-K over the categories plus a trailing "missing" indicator.
    Categorical { levels: usize },
}

/// Maps instances to the real vectors the discriminants act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    slots: Vec<Slot>,
}

impl FeatureEncoder {
    pub fn fit(ds: &Dataset) -> Self {
        let slots = ds
            .feature_kinds()
            .iter()
            .enumerate()
            .map(|(j, kind)| match *kind {
                FeatureKind::Numeric => {
                    let (sum, n) = ds
                        .instances()
                        .iter()
                        .filter_map(|i| i.features[j].and_then(Value::as_numeric))
                        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                    Slot::Numeric {
                        mean: if n > 0 { sum / n as f64 } else { 0.0 },
                    }
                }
                FeatureKind::Categorical { levels } => Slot::Categorical { levels },
            })
            .collect();
        FeatureEncoder { slots }
    }

    /// Length of an encoded vector, including the constant slot.
    pub fn dim(&self) -> usize {
        1 + self
            .slots
            .iter()
            .map(|s| match s {
                Slot::Numeric { .. } => 1,
                Slot::Categorical { levels } => levels + 1,
            })
            .sum::<usize>()
    }

    pub fn encode(&self, x: &Instance) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.dim());
        y.push(1.0);
        for (slot, v) in self.slots.iter().zip(&x.features) {
            match *slot {
                Slot::Numeric { mean } => y.push(v.and_then(Value::as_numeric).unwrap_or(mean)),
                Slot::Categorical { levels } => {
                    let hot = v
                        .and_then(Value::as_category)
                        .filter(|&c| c < levels)
                        .unwrap_or(levels);
                    y.extend((0..=levels).map(|c| if c == hot { 1.0 } else { 0.0 }));
                }
            }
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMachine {
    pub encoder: FeatureEncoder,
    /// One weight vector per class, each of length `encoder.dim()`.
    pub weights: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn predict(weights: &[Vec<f64>], y: &[f64]) -> usize {
    let g: Vec<f64> = weights.iter().map(|w| dot(w, y)).collect();
    argmax_first(&g)
}

impl LinearMachine {
    pub fn train(ds: &Dataset, restarts: usize, schedule: &ThermalSchedule, seed: Seed) -> Self {
        let encoder = FeatureEncoder::fit(ds);
        let ys: Vec<Vec<f64>> = ds.instances().iter().map(|x| encoder.encode(x)).collect();
        let labels = ds.labels();
        let r = ds.class_count();
        let dim = encoder.dim();

        let present: Vec<usize> = ds
            .class_histogram()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, _)| k)
            .collect();
        if let [only] = present.as_slice() {
            // One class: a bias on that class alone is exact.
            let mut weights = vec![vec![0.0; dim]; r];
            weights[*only][0] = 1.0;
            return LinearMachine { encoder, weights };
        }

        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        for restart in 0..restarts {
            let mut order: Vec<usize> = (0..ys.len()).collect();
            order.shuffle(&mut seed.derive_indexed("restart", restart as u64).rng());
            let weights = thermal_train(&ys, &labels, &order, r, dim, schedule);

            let mut branches = vec![vec![0usize; r]; r];
            for (y, &l) in ys.iter().zip(&labels) {
                branches[predict(&weights, y)][l] += 1;
            }
            let score = gain_ratio(&branches).unwrap_or(0.0);
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, weights));
            }
        }
        let (_, weights) = best.expect("at least one restart");
        LinearMachine { encoder, weights }
    }

    pub fn discriminants(&self, x: &Instance) -> Vec<f64> {
        let y = self.encoder.encode(x);
        self.weights.iter().map(|w| dot(w, &y)).collect()
    }
}

impl Classifier for LinearMachine {
    fn classify(&self, x: &Instance) -> usize {
        argmax_first(&self.discriminants(x))
    }
}

fn thermal_train(
    ys: &[Vec<f64>],
    labels: &[usize],
    order: &[usize],
    r: usize,
    dim: usize,
    schedule: &ThermalSchedule,
) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; dim]; r];
    let mut t = schedule.initial_temperature;
    loop {
        let mut mistakes = 0usize;
        for &idx in order {
            let y = &ys[idx];
            let i = labels[idx];
            let j = predict(&w, y);
            if j != i {
                mistakes += 1;
                let yy = dot(y, y);
                let k = (dot(&w[j], y) - dot(&w[i], y)) / (2.0 * yy);
                let c = t * t / (t + k);
                for (d, &v) in y.iter().enumerate() {
                    w[i][d] += c * v;
                    w[j][d] -= c * v;
                }
            }
            t *= schedule.decay;
            if t <= schedule.floor {
                return w;
            }
        }
        if mistakes == 0 {
            return w;
        }
    }
}
