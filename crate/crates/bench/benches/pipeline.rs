use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mislabel::filter::{apply_filter, cv_tag};
use mislabel::{Classifier, FilterPolicy, LearnerSpec, Seed};
use mislabel_bench::noisy_pairs;

fn learners(c: &mut Criterion) {
    let ds = noisy_pairs(100);
    let mut group = c.benchmark_group("train");
    for spec in LearnerSpec::default_trio() {
        group.bench_function(BenchmarkId::from_parameter(spec.label()), |b| {
            b.iter(|| spec.train(black_box(&ds), Seed(7)).unwrap())
        });
    }
    group.finish();

    let model = LearnerSpec::nearest_neighbor().train(&ds, Seed(0)).unwrap();
    c.bench_function("classify/1-NN", |b| {
        b.iter(|| {
            ds.instances()
                .iter()
                .map(|x| model.classify(black_box(x)))
                .sum::<usize>()
        })
    });
}

fn tagging(c: &mut Criterion) {
    let mut group = c.benchmark_group("cv_tag");
    group.sample_size(10);
    for per_class in [50, 100] {
        let ds = noisy_pairs(per_class);
        group.bench_with_input(BenchmarkId::from_parameter(ds.len()), &ds, |b, ds| {
            b.iter(|| cv_tag(ds, &LearnerSpec::default_trio(), 4, Seed(3)).unwrap())
        });
    }
    group.finish();

    let ds = noisy_pairs(100);
    let tags = cv_tag(&ds, &LearnerSpec::default_trio(), 4, Seed(3)).unwrap();
    c.bench_function("apply_filter/majority", |b| {
        b.iter(|| apply_filter(black_box(&tags), FilterPolicy::majority(3)).unwrap())
    });
}

criterion_group!(benches, learners, tagging);
criterion_main!(benches);
