use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use deltabose::propagator::{evaluate, propagator_zero_point};
use deltabose::{EvalOptions, Method};
use deltabose_bench::query;

fn evaluators(c: &mut Criterion) {
    let mut g = c.benchmark_group("evaluate");
    g.sample_size(10);
    let cases = [
        (2, -1.0, Method::TwRepulsive),
        (2, -1.0, Method::EigenRepulsive),
        (2, 1.0, Method::Thm1),
        (2, 1.0, Method::Thm2),
        (2, 1.0, Method::PartitionForm),
        (3, -1.0, Method::TwRepulsive),
        (3, 1.0, Method::Thm2),
    ];
    for (n, kappa, method) in cases {
        let q = query(n, 0.5, kappa, method);
        g.bench_with_input(BenchmarkId::new(method.name(), n), &q, |b, q| {
            b.iter(|| evaluate(q, &EvalOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn zero_point(c: &mut Criterion) {
    let mut g = c.benchmark_group("zero-point");
    g.sample_size(10);
    for n in [2, 3, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| propagator_zero_point(n, 1.0, 1.0, 1e-8).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, evaluators, zero_point);
criterion_main!(benches);
