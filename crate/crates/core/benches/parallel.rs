use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ionrep::exec::Execution;
use ionrep::gates::{self, GateKind, GateParams};
use ionrep::montecarlo;
use ionrep::rates::RepeaterConfig;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn monte_carlo(c: &mut Criterion) {
    let cfg = RepeaterConfig::default();
    let mut group = c.benchmark_group("estimate_rate_n3_10k");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| montecarlo::estimate_rate(black_box(&cfg), 10_000, 1, exec).unwrap())
        });
    }
    group.finish();
}

fn fidelity_grid(c: &mut Criterion) {
    let params = GateParams::nominal();
    let mut group = c.benchmark_group("cnot_grid_2x2x2");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                gates::rate_scaling_grid(GateKind::Cnot, black_box(&params), &[0.5, 2.0], exec).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, fidelity_grid);
criterion_main!(benches);
