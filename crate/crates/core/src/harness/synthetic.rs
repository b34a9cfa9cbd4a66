use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset, Instance, Schema};
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Gaussian clusters arranged in confusable pairs.
///
/// Classes `2p` and `2p + 1` form pair `p`. Pair centres lie along the first
/// axis, `pair_spacing` apart; within a pair the two class centres sit
/// `separation` apart along the second axis (the first axis when `dims` is
/// 1). Every cluster is isotropic with standard deviation `sigma`. With an
/// odd class count the last class has no partner. Classes are named
/// `c0, c1, ...` and features `x0, x1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub instances_per_class: Vec<usize>,
    #[serde(default = "default_dims")]
    pub dims: usize,
    pub separation: f64,
    #[serde(default)]
    pub pair_spacing: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_dims() -> usize {
    2
}

fn default_sigma() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn new(instances_per_class: Vec<usize>, separation: f64) -> Self {
        SyntheticSpec {
            instances_per_class,
            dims: 2,
            separation,
            pair_spacing: None,
            sigma: 1.0,
        }
    }

    pub fn class_count(&self) -> usize {
        self.instances_per_class.len()
    }

    /// `(2p, 2p + 1)` for every complete pair.
    pub fn confusable_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.class_count() / 2)
            .map(|p| (2 * p, 2 * p + 1))
            .collect()
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.class_count()).map(|c| format!("c{c}")).collect()
    }

    fn spacing(&self) -> f64 {
        self.pair_spacing.unwrap_or(3.0 * self.separation)
    }

    pub fn centre(&self, class: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dims];
        let half = if class.is_multiple_of(2) { -0.5 } else { 0.5 };
        c[0] = (class / 2) as f64 * self.spacing();
        let axis = if self.dims > 1 { 1 } else { 0 };
        c[axis] += half * self.separation;
        c
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: Seed) -> Result<Dataset> {
    if spec.class_count() < 2 {
        return Err(Error::invalid("synthetic data needs at least two classes"));
    }
    if spec.instances_per_class.contains(&0) {
        return Err(Error::invalid("every class needs at least one instance"));
    }
    if spec.dims == 0 {
        return Err(Error::invalid(
            "synthetic data needs at least one dimension",
        ));
    }
    if !(spec.sigma.is_finite() && spec.sigma > 0.0) {
        return Err(Error::invalid(format!(
            "degenerate covariance: sigma = {}",
            spec.sigma
        )));
    }
    if !(spec.separation.is_finite() && spec.spacing().is_finite()) {
        return Err(Error::invalid("separations must be finite"));
    }
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seed.rng();
    let mut instances = Vec::new();
    for (class, &count) in spec.instances_per_class.iter().enumerate() {
        let centre = spec.centre(class);
        for _ in 0..count {
            let x: Vec<f64> = centre.iter().map(|c| c + noise.sample(&mut rng)).collect();
            instances.push(Instance::numeric(&x, class));
        }
    }
    let mut columns: Vec<Column> = (0..spec.dims)
        .map(|j| Column::numeric(format!("x{j}")))
        .collect();
    columns.push(Column::categorical("class", spec.class_names()));
    Dataset::new(Schema::new(columns, "class")?, instances)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_errors() {
        let s = SyntheticSpec::new(vec![10, 10, 10, 10, 10], 3.0);
        assert_eq!(s.confusable_pairs(), vec![(0, 1), (2, 3)]);
        assert_eq!(s.centre(0), vec![0.0, -1.5]);
        assert_eq!(s.centre(3), vec![9.0, 1.5]);
        let ds = generate_synthetic(&s, Seed(1)).unwrap();
        assert_eq!(ds.len(), 50);
        assert_eq!(ds.class_histogram(), vec![10; 5]);
        assert_eq!(generate_synthetic(&s, Seed(1)).unwrap(), ds);

        assert!(generate_synthetic(&SyntheticSpec::new(vec![10], 3.0), Seed(0)).is_err());
        let mut bad = s.clone();
        bad.sigma = 0.0;
        assert!(generate_synthetic(&bad, Seed(0)).is_err());
    }
}
