use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gendisc::experiments::{self, ConvergenceConfig, LinevalConfig, Regularization, Source};
use gendisc::{Execution, MixtureSpec, OptimizerConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bayes_error(c: &mut Criterion) {
    let spec = MixtureSpec::new(5, 50).unwrap();
    let mut group = c.benchmark_group("bayes_error_mc");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| spec.bayes_error(200_000, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn convergence_grid(c: &mut Criterion) {
    let spec = MixtureSpec::new(5, 20).unwrap();
    let config = ConvergenceConfig {
        n_values: vec![10, 20, 30, 40],
        repeats: 3,
        test_size: 2000,
        m_max: 2000,
        ..ConvergenceConfig::default()
    };
    let mut group = c.benchmark_group("convergence_grid");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| experiments::run_convergence(&Source::Synthetic(spec), &config, exec).unwrap())
        });
    }
    group.finish();
}

fn lineval(c: &mut Criterion) {
    let spec = MixtureSpec::new(3, 40).unwrap();
    let train = spec.sample(2000, 1).unwrap();
    let test = spec.sample(2000, 2).unwrap();
    let config = LinevalConfig {
        m_grid: vec![12, 50, 200, 800, 2000],
        repeats: 5,
        regularization: Regularization::default(),
        optimizer: OptimizerConfig::default(),
        seed: 3,
    };
    let mut group = c.benchmark_group("lineval");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| experiments::run_lineval(&train, &test, &config, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bayes_error, convergence_grid, lineval);
criterion_main!(benches);
