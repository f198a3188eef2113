use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ehmac::throughput::{
    exact_throughput, exact_throughput_by_paths, mc_throughput, throughput_set_function,
    Estimator,
};
use ehmac_bench::{bernoulli_fixture, correlated_fixture};

fn exact_routes(c: &mut Criterion) {
    let (model, policies) = bernoulli_fixture(2);
    let full = 0b11;
    let mut group = c.benchmark_group("exact_throughput");
    for n in [4usize, 6, 8] {
        group.bench_with_input(BenchmarkId::new("propagate", n), &n, |b, &n| {
            b.iter(|| exact_throughput(&policies, &model, full, black_box(n)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("paths", n), &n, |b, &n| {
            b.iter(|| exact_throughput_by_paths(&policies, &model, full, black_box(n)).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let (model, policies) = bernoulli_fixture(1);
    c.bench_function("mc_throughput/k1_n1000_p200", |b| {
        b.iter(|| mc_throughput(&policies, &model, 1, 1000, black_box(200), 7).unwrap())
    });
}

fn set_functions(c: &mut Criterion) {
    let (model, policies) = correlated_fixture(4);
    c.bench_function("set_function/exact_k4_n8", |b| {
        b.iter(|| throughput_set_function(&policies, &model, black_box(8), &Estimator::exact()))
    });
    c.bench_function("set_function/mc_k4_n50", |b| {
        let est = Estimator::monte_carlo(100, 3);
        b.iter(|| throughput_set_function(&policies, &model, black_box(50), &est))
    });
}

criterion_group!(benches, exact_routes, monte_carlo, set_functions);
criterion_main!(benches);
