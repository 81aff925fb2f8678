use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pointflow::integrate::{simulate_batch, simulate_batch_sequential};
use pointflow::model::{field, field_sequential};
use pointflow::{Complex64, SimulationConfig, SystemState};

fn cloud(n: usize, seed: u64) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let g = (0..n)
        .map(|_| Complex64::new(rng.gen_range(0.5..1.5), rng.gen_range(-1.0..1.0)))
        .collect();
    (z, g)
}

fn bench_field(c: &mut Criterion) {
    let mut group = c.benchmark_group("velocity-field");
    for n in [256usize, 1024, 4096] {
        let (z, g) = cloud(n, 7);
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| field_sequential(black_box(&z), black_box(&g)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| field(black_box(&z), black_box(&g)).unwrap())
        });
    }
    group.finish();
}

fn bench_batch(c: &mut Criterion) {
    let configs: Vec<SimulationConfig> = (0..32)
        .map(|seed| {
            let (z, _) = cloud(6, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let g: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let state = SystemState::from_real(0.0, &z, &g).unwrap();
            SimulationConfig::new(state, 0.05)
        })
        .collect();
    let mut group = c.benchmark_group("simulate-batch");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| simulate_batch_sequential(black_box(&configs))));
    group.bench_function("parallel", |b| b.iter(|| simulate_batch(black_box(&configs))));
    group.finish();
}

criterion_group!(benches, bench_field, bench_batch);
criterion_main!(benches);
