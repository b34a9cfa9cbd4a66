//! Fixtures shared by the benchmarks.

use mislabel::harness::{generate_synthetic, SyntheticSpec};
use mislabel::noise::inject_noise;
use mislabel::{Dataset, NoiseSpec, Seed};

/// Four Gaussian classes in two confusable pairs with 20% pair noise.
pub fn noisy_pairs(per_class: usize) -> Dataset {
    let mut spec = SyntheticSpec::new(vec![per_class; 4], 4.0);
    spec.pair_spacing = Some(12.0);
    let ds = generate_synthetic(&spec, Seed(1)).expect("valid spec");
    inject_noise(&ds, &NoiseSpec::new(vec![(0, 1), (2, 3)], 0.2), Seed(2))
        .expect("valid pairs")
        .0
}
