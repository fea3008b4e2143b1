//! Parallel versus sequential execution of the data-parallel hot spots.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fibflow::algorithms::{train, TrainConfig, Variant};
use fibflow::harness::{generate_data, reference_experiment, run_experiment, DataSpec};
use fibflow::learners::BaseLearnerConfig;
use fibflow::par;
use fibflow::rkhs::{gram, KernelSpec};
use fibflow::spectral::StepSpec;

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", true), ("sequential", false)]
}

fn run<R>(parallel: bool, f: impl FnOnce() -> R) -> R {
    if parallel {
        f()
    } else {
        par::sequential(f)
    }
}

fn bench_gram(c: &mut Criterion) {
    let spec = DataSpec { n: 1200, ..DataSpec::reference_friedman(0) };
    let (train_set, _) = generate_data(&spec).unwrap();
    let kernel = KernelSpec::gaussian(0.5);
    let mut group = c.benchmark_group("gram");
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(parallel, || black_box(gram(&kernel, train_set.inputs()))))
        });
    }
    group.finish();
}

fn bench_rao_blackwell(c: &mut Criterion) {
    let spec = DataSpec::reference_sinusoid(0);
    let (train_set, test_set) = generate_data(&spec).unwrap();
    let cfg = TrainConfig::new(
        Variant::RaoBlackwell { draws: 16, exact: false },
        BaseLearnerConfig::rff_ridge(100, 0.2, 1e-3, 7),
        StepSpec::Golden { eta0: 0.5 },
        20,
    );
    let mut group = c.benchmark_group("rao_blackwell_train");
    group.sample_size(10);
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(parallel, || black_box(train(&cfg, &train_set, Some(&test_set)).unwrap())))
        });
    }
    group.finish();
}

fn bench_experiment(c: &mut Criterion) {
    let cfg = reference_experiment(DataSpec::reference_sinusoid(0), 30, 2);
    let dir = tempfile::tempdir().unwrap();
    let mut group = c.benchmark_group("reference_experiment");
    group.sample_size(10);
    for (name, parallel) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(parallel, || black_box(run_experiment(&cfg, &dir.path().join(name)).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_gram, bench_rao_blackwell, bench_experiment);
criterion_main!(benches);
