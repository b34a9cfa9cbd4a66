#![allow(dead_code)]

use mislabel::harness::{DataSource, ExperimentConfig, SyntheticSpec};

/// Sums the probability of every error-indicator vector of `rates.len()`
/// independent detectors for which `event` holds.
pub fn enumerate(rates: &[f64], event: impl Fn(&[bool]) -> bool) -> f64 {
    let m = rates.len();
    let mut total = 0.0;
    for bits in 0u32..(1 << m) {
        let errs: Vec<bool> = (0..m).map(|i| bits >> i & 1 == 1).collect();
        if event(&errs) {
            total += errs
                .iter()
                .zip(rates)
                .map(|(&e, &p)| if e { p } else { 1.0 - p })
                .product::<f64>();
        }
    }
    total
}

pub fn majority_event(errs: &[bool]) -> bool {
    errs.iter().filter(|&&e| e).count() > errs.len() / 2
}

pub fn all_event(errs: &[bool]) -> bool {
    errs.iter().all(|&e| e)
}

pub fn any_event(errs: &[bool]) -> bool {
    errs.iter().any(|&e| e)
}

/// Four Gaussian classes in two confusable pairs, 400 train / 50 test
/// instances per run.
pub fn synthetic_config() -> ExperimentConfig {
    let mut spec = SyntheticSpec::new(vec![113, 113, 112, 112], 4.0);
    spec.pair_spacing = Some(12.0);
    let mut cfg = ExperimentConfig::new(DataSource::Synthetic { spec, seed: 0 });
    cfg.noise_pairs = vec![("c0".into(), "c1".into()), ("c2".into(), "c3".into())];
    cfg.noise_levels = vec![0.0, 0.1, 0.2, 0.3];
    cfg.runs = 10;
    cfg.train_fraction = 400.0 / 450.0;
    cfg.seed = 0;
    cfg
}
