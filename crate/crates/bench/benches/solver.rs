use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qmoney_core::operators::build_ops;
use qmoney_core::security::{min_loss_problem, qubit_baseline, AnalysisOptions};
use qmoney_core::states::build_states;
use qmoney_core::{linalg, sdp, Scenario, SdpOptions};
use std::hint::black_box;

fn operators(c: &mut Criterion) {
    let mut g = c.benchmark_group("operators");
    for (scenario, randomized) in [(Scenario::Trusted, false), (Scenario::Untrusted, true)] {
        let id = format!("{scenario}/{}", if randomized { "randomized" } else { "pure" });
        g.bench_function(id, |b| {
            b.iter(|| build_ops(&build_states(black_box(0.5), randomized).unwrap(), scenario))
        });
    }
    g.finish();
}

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigenvalues");
    for n in [36, 108, 252] {
        let m = linalg::ComplexMatrix::from_fn(n, n, |i, j| {
            let x = ((i * 31 + j * 17) % 13) as f64 + if i == j { n as f64 } else { 0.0 };
            qmoney_core::Complex64::new(x, if i == j { 0.0 } else { 0.1 * (i as f64 - j as f64) })
        })
        .symmetrize();
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| m.eigenvalues().unwrap()));
    }
    g.finish();
}

fn solves(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("qubit/trusted", |b| b.iter(|| qubit_baseline(Scenario::Trusted, &SdpOptions::default())));
    for (scenario, randomized) in
        [(Scenario::Trusted, false), (Scenario::Trusted, true), (Scenario::Untrusted, false), (Scenario::Untrusted, true)]
    {
        let ops = build_ops(&build_states(0.5, randomized).unwrap(), scenario);
        let problem = min_loss_problem(&ops, 0.01);
        let opts = AnalysisOptions::default().sdp;
        let id = format!("min_loss/{scenario}/{}", if randomized { "randomized" } else { "pure" });
        g.bench_function(id, |b| b.iter(|| sdp::solve(black_box(&problem), &opts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, operators, eigen, solves);
criterion_main!(benches);
