use std::collections::BTreeSet;

use mislabel::analysis::{
    analytic_consensus_e1, analytic_consensus_e2, analytic_majority_error, precision_estimates,
};
use mislabel::data::{make_folds, split_indices, train_size, Column};
use mislabel::filter::apply_filter;
use mislabel::learners::{gain_ratio, Classifier, LinearMachine, ThermalSchedule, TreeModel};
use mislabel::noise::inject_noise;
use mislabel::{
    Dataset, FilterPolicy, Instance, LearnerSpec, NoiseSpec, Schema, Seed, TagMatrix, Value,
};
use proptest::prelude::*;

fn mixed_schema() -> Schema {
    Schema::new(
        vec![
            Column::numeric("a"),
            Column::categorical("colour", ["red", "green", "blue"]),
            Column::numeric("b"),
            Column::categorical("label", ["x", "y", "z"]),
        ],
        "label",
    )
    .unwrap()
}

fn row() -> impl Strategy<Value = Instance> {
    (
        prop::option::weighted(0.8, -1.0e6f64..1.0e6),
        prop::option::weighted(0.8, 0usize..3),
        prop::option::weighted(0.8, -5i32..5),
        0usize..3,
    )
        .prop_map(|(a, c, b, label)| {
            Instance::new(
                vec![
                    a.map(Value::Numeric),
                    c.map(Value::Category),
                    b.map(|b| Value::Numeric(b as f64 * 0.25)),
                ],
                label,
            )
        })
}

fn tag_matrix(m: usize) -> impl Strategy<Value = TagMatrix> {
    prop::collection::vec(prop::collection::vec(any::<bool>(), m), 1..60).prop_map(move |rows| {
        let n = rows.len();
        TagMatrix::from_verdicts(rows, vec![LearnerSpec::nearest_neighbor(); m], vec![0; n])
            .unwrap()
    })
}

fn labelled_points(classes: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec((prop::collection::vec(-20i32..20, 2), 0..classes), 2..40).prop_map(
        move |rows| {
            let instances = rows
                .into_iter()
                .map(|(x, y)| Instance::numeric(&[x[0] as f64, x[1] as f64], y))
                .collect();
            let names: Vec<String> = (0..classes).map(|c| format!("k{c}")).collect();
            let schema = Schema::new(
                vec![
                    Column::numeric("u"),
                    Column::numeric("v"),
                    Column::categorical("class", names),
                ],
                "class",
            )
            .unwrap();
            Dataset::new(schema, instances).unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dataset_round_trips(rows in prop::collection::vec(row(), 1..40)) {
        let ds = Dataset::new(mixed_schema(), rows).unwrap();
        let text = ds.to_delimited_string();
        let schema = Schema::from_toml_str(&ds.schema().to_toml_string()).unwrap();
        let again = Dataset::from_reader(&schema, text.as_bytes()).unwrap();
        prop_assert_eq!(&again, &ds);
        prop_assert_eq!(again.to_delimited_string(), text);
    }

    #[test]
    fn split_partitions(n in 2usize..500, frac in 0.05f64..0.95, seed: u64) {
        prop_assume!(train_size(n, frac) > 0 && train_size(n, frac) < n);
        let (train, test) = split_indices(n, frac, Seed(seed)).unwrap();
        prop_assert_eq!(train.len(), train_size(n, frac));
        prop_assert_eq!(train.len() + test.len(), n);
        let all: BTreeSet<usize> = train.iter().chain(&test).copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(split_indices(n, frac, Seed(seed)).unwrap(), (train, test));
    }

    #[test]
    fn folds_are_balanced(n in 2usize..300, k in 2usize..12, seed: u64) {
        prop_assume!(k <= n);
        let folds = make_folds(n, k, Seed(seed)).unwrap();
        prop_assert_eq!(folds.len(), k);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let all: BTreeSet<usize> = folds.concat().into_iter().collect();
        prop_assert_eq!(all.len(), n);
    }

    #[test]
    fn gain_ratio_in_unit_interval(counts in prop::collection::vec(prop::collection::vec(0usize..30, 3), 2..5)) {
        if let Some(g) = gain_ratio(&counts) {
            prop_assert!((0.0..=1.0).contains(&g), "{g}");
        }
    }

    #[test]
    fn unpruned_tree_fits_consistent_data(ds in labelled_points(3)) {
        // Drop duplicate points so the data is consistent.
        let mut seen = BTreeSet::new();
        let keep: Vec<usize> = (0..ds.len())
            .filter(|&i| {
                let x = &ds.instances()[i].features;
                seen.insert((x[0].unwrap().as_numeric().unwrap() as i64, x[1].unwrap().as_numeric().unwrap() as i64))
            })
            .collect();
        let ds = ds.subset(&keep);
        let tree = TreeModel::grow(&ds, 2);
        for x in ds.instances() {
            prop_assert_eq!(tree.classify(x), x.label);
        }
    }

    #[test]
    fn linear_machine_scale_invariant(ds in labelled_points(3), exp in -8i32..8, seed: u64) {
        // Powers of two scale every discriminant exactly.
        let scale = 2f64.powi(exp);
        let lm = LinearMachine::train(&ds, 2, &ThermalSchedule::default(), Seed(seed));
        let mut scaled = lm.clone();
        for w in scaled.weights.iter_mut().flatten() {
            *w *= scale;
        }
        for x in ds.instances() {
            prop_assert_eq!(lm.classify(x), scaled.classify(x));
        }
    }

    #[test]
    fn trainers_are_deterministic(ds in labelled_points(2), seed: u64) {
        for spec in LearnerSpec::default_trio() {
            prop_assert_eq!(spec.train(&ds, Seed(seed)).unwrap(), spec.train(&ds, Seed(seed)).unwrap());
        }
    }

    #[test]
    fn filter_discards_nest(tags in tag_matrix(3)) {
        let n = tags.len();
        let set = |p| {
            let r = apply_filter(&tags, p).unwrap();
            assert_eq!(r.kept.len() + r.discarded.len(), n);
            r.discarded.into_iter().collect::<BTreeSet<_>>()
        };
        let cf = set(FilterPolicy::consensus(3));
        let mf = set(FilterPolicy::majority(3));
        let union: BTreeSet<usize> = (0..3).flat_map(|d| set(FilterPolicy::Single { detector: d })).collect();
        prop_assert!(cf.is_subset(&mf));
        prop_assert!(mf.is_subset(&union));
        prop_assert_eq!(set(FilterPolicy::Threshold { wrong: 1 }), union);
    }

    #[test]
    fn noise_mask_round_trips(ds in labelled_points(4), rate in 0.0f64..=1.0, seed: u64) {
        let spec = NoiseSpec::new(vec![(0, 1)], rate);
        let (noisy, mask) = inject_noise(&ds, &spec, Seed(seed)).unwrap();
        prop_assert_eq!(mask.restore(&noisy).unwrap(), ds.clone());
        prop_assert_eq!(mask.apply(&ds).unwrap(), noisy.clone());
        for (a, b) in ds.instances().iter().zip(noisy.instances()) {
            if a.label >= 2 {
                prop_assert_eq!(a, b);
            }
        }
        let parsed = mislabel::noise::CorruptionMask::from_reader(mask.to_delimited_string().as_bytes()).unwrap();
        prop_assert_eq!(parsed, mask);
    }

    #[test]
    fn majority_beats_single_below_half(m in prop::sample::select(vec![1usize, 3, 5, 7]), p in 0.0f64..=1.0) {
        let e = analytic_majority_error(m, p).unwrap();
        if p < 0.5 {
            prop_assert!(e <= p + 1e-15);
        } else if p > 0.5 {
            prop_assert!(e >= p - 1e-15);
        }
    }

    #[test]
    fn consensus_bounds(rates in prop::collection::vec(0.0f64..=1.0, 1..6)) {
        let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rates.iter().copied().fold(0.0, f64::max);
        prop_assert!(analytic_consensus_e1(&rates).unwrap() <= lo + 1e-15);
        prop_assert!(analytic_consensus_e2(&rates).unwrap() >= hi - 1e-15);
    }

    #[test]
    fn precision_scale_invariant(m in 1u32..1000, extra in 1u32..1000, inter_frac in 0.0f64..=1.0, d_extra in 0u32..500, scale in 0.1f64..50.0) {
        let corrupted = m as f64;
        let intersection = (inter_frac * corrupted).floor();
        let discarded = intersection + d_extra as f64;
        let total = m + extra;
        let base = precision_estimates(discarded, corrupted, intersection, total as usize).unwrap();
        // Integer scale keeps the total an integer.
        let k = scale.ceil();
        let scaled = precision_estimates(discarded * k, corrupted * k, intersection * k, (total as f64 * k) as usize).unwrap();
        prop_assert!((base.0 - scaled.0).abs() < 1e-12);
        prop_assert!((base.1 - scaled.1).abs() < 1e-12);
    }
}

#[test]
fn majority_equality_points() {
    for m in [1, 3, 5] {
        assert_eq!(analytic_majority_error(m, 0.0).unwrap(), 0.0);
        assert!((analytic_majority_error(m, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((analytic_majority_error(m, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }
}
