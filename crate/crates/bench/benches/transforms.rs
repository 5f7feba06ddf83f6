use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use porous_equiv::random::random_network;
use porous_equiv::realization::transfer_function;
use porous_equiv::sim::{simulate, uniform_grid, InputSignal};
use porous_equiv::transforms::{to_minc, to_mrmt};
use porous_equiv::{build_state_space, StateSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn network(n: usize) -> StateSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    build_state_space(&random_network(&mut rng, n, 0.3, -2.0, 2.0))
        .unwrap()
        .state_space
}

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("transforms");
    for n in [4, 8, 16, 32] {
        let ss = network(n);
        group.bench_with_input(BenchmarkId::new("mrmt", n), &ss, |b, ss| {
            b.iter(|| to_mrmt(ss).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("minc", n), &ss, |b, ss| {
            b.iter(|| to_minc(ss).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("transfer_function", n), &ss, |b, ss| {
            b.iter(|| transfer_function(ss))
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    let grid = uniform_grid(50.0, 1001);
    let input = InputSignal::Pulse {
        amplitude: 1.0,
        duration: 1.0,
    };
    for n in [4, 16] {
        let ss = network(n);
        group.bench_with_input(BenchmarkId::new("pulse_1001", n), &ss, |b, ss| {
            b.iter(|| simulate(ss, &input, &vec![0.0; ss.n()], &grid).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, transforms, simulation);
criterion_main!(benches);
