use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use exclusion_core::ensemble::{run_ensemble, SimParams};
use exclusion_core::grid::TimeGrid;
use exclusion_core::law::law_from_pairs;

fn params(replicas: usize) -> SimParams {
    SimParams {
        law: law_from_pairs(&[(1, 1.0)]).unwrap(),
        rho: 0.5,
        sites: 256,
        grid: TimeGrid::new(0.5, 2.0, 4.0).unwrap(),
        replicas,
        master_seed: 0x5eed,
    }
}

fn bench_workers(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble_workers");
    group.sample_size(10);
    for replicas in [32usize, 96] {
        group.bench_with_input(
            BenchmarkId::new("sequential", replicas),
            &replicas,
            |b, &n| b.iter(|| run_ensemble(&params(n), 1)),
        );
        #[cfg(feature = "parallel")]
        group.bench_with_input(
            BenchmarkId::new("parallel4", replicas),
            &replicas,
            |b, &n| b.iter(|| run_ensemble(&params(n), 4)),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_workers);
criterion_main!(benches);
