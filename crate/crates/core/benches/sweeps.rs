use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ncmaj::hermitian::Spectrum;
use ncmaj::klyachko::{enumerate_admissible, klyachko_feasible_sum_with, EnumerationOptions};
use ncmaj::oracle::{realize_spectra_sum, OracleBudget};
use ncmaj::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn spec(v: &[f64]) -> Spectrum {
    Spectrum::new(v.to_vec())
}

fn oracle_restarts(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_restarts");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    // Infeasible target, so every restart runs to the iteration cap.
    let target = spec(&[3.0, 3.0, 0.0]);
    let summands = [spec(&[4.0, 0.0, 0.0]), spec(&[2.0, 0.0, 0.0])];
    for (name, exec) in MODES {
        let budget = OracleBudget { restarts: 16, iterations: 200, exec, ..OracleBudget::default() };
        group.bench_function(BenchmarkId::new(name, "n3-m2-16x200"), |b| {
            b.iter(|| realize_spectra_sum(black_box(&target), black_box(&summands), &budget).unwrap())
        });
    }
    group.finish();
}

fn admissible_enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("admissible_enumeration");
    group.sample_size(10);
    for (n, m) in [(4, 2), (5, 2), (4, 3)] {
        for (name, exec) in MODES {
            let opts = EnumerationOptions { force: true, memo: None, exec };
            group.bench_function(BenchmarkId::new(name, format!("n{n}-m{m}")), |b| {
                b.iter(|| enumerate_admissible(black_box(n), black_box(m), &opts).unwrap())
            });
        }
    }
    group.finish();
}

fn klyachko_decision(c: &mut Criterion) {
    let mut group = c.benchmark_group("klyachko_decision");
    let cases = [
        ("n4-m2", spec(&[5.0, 3.0, 1.0, -1.0]), vec![spec(&[3.0, 1.0, 0.0, -1.0]), spec(&[2.0, 1.0, 1.0, 1.0])]),
        (
            "n6-m3",
            spec(&[6.0, 4.0, 3.0, 2.0, 1.0, 0.0]),
            vec![spec(&[3.0, 2.0, 1.0, 0.0, 0.0, 0.0]), spec(&[2.0, 1.0, 1.0, 1.0, 0.0, 0.0]), spec(&[2.0, 2.0, 0.0, 0.0, 0.0, 0.0])],
        ),
    ];
    for (label, target, summands) in &cases {
        for (name, exec) in MODES {
            group.bench_function(BenchmarkId::new(name, label), |b| {
                b.iter(|| klyachko_feasible_sum_with(black_box(target), black_box(summands), exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, oracle_restarts, admissible_enumeration, klyachko_decision);
criterion_main!(benches);
