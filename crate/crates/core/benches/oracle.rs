//! Deviation search and t(α) sweep, one thread against the rayon pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fisher_game::deviation::{verify_ne, OracleConfig};
use fisher_game::parallel::Execution;
use fisher_game::reproduce::fixture;
use fisher_game::two_buyer::{alpha_sweep, OrderedTwoBuyerMarket};
use fisher_game::Tolerances;
use num::BigRational;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_verify(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("verify_ne");
    group.sample_size(10);
    for name in ["example4", "example5"] {
        let input = fixture(name).unwrap();
        let profile = input.profile_or_truthful();
        for (mode, exec) in MODES {
            let config = OracleConfig { exec, ..OracleConfig::default() };
            group.bench_with_input(BenchmarkId::new(mode, name), &config, |b, config| {
                b.iter(|| verify_ne(&input.market, &profile, config, &tol).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let market = fixture("example7").unwrap().market;
    let o = OrderedTwoBuyerMarket::<BigRational>::new(&market).unwrap();
    let mut group = c.benchmark_group("alpha_sweep");
    for (mode, exec) in MODES {
        group.bench_function(mode, |b| b.iter(|| alpha_sweep(&o, 400, 0.0, exec)));
    }
    group.finish();
}

criterion_group!(benches, bench_verify, bench_sweep);
criterion_main!(benches);
