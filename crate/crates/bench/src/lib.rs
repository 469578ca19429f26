//! Stepping and measurement benchmarks, driven from `benches/stepping.rs`.

use criterion::{BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scnls_core::dynamics::Stepper;
use scnls_core::groundstate::solve_ground_state;
use scnls_core::harness::{Problem, RunConfig};
use scnls_core::noise::sample_increments;
use scnls_core::observables::measure;
use std::hint::black_box;

fn problem(dim: usize, n: usize) -> Problem {
    let text = format!(
        r#"
[grid]
dim = {dim}
n = {n}
length = 20.0
[coupling]
sigma = 1.0
lambda = [[1.0, 0.5], [0.5, 1.0]]
[initial.u]
family = "gaussian"
amplitude = 1.0
width = 1.0
chirp = 0.1
[initial.v]
family = "sech"
amplitude = 0.8
width = 1.5
[noise]
K = 8
a0 = 0.5
[time]
t_final = 1.0
dt = 1e-3
"#
    );
    RunConfig::from_toml_str(&text).unwrap().build().unwrap()
}

const SIZES: [(usize, usize); 4] = [(1, 1024), (1, 4096), (2, 64), (2, 128)];

pub fn strang_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("strang_step");
    for (dim, n) in SIZES {
        let p = problem(dim, n);
        let stepper = Stepper::new(&p.grid, &p.coupling, &p.noise);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inc = sample_increments(p.noise.num_modes(), 1e-3, &mut rng).unwrap();
        group.throughput(Throughput::Elements(p.grid.len() as u64));
        group.bench_with_input(BenchmarkId::new(format!("{dim}d"), n), &p, |b, p| {
            let mut state = p.initial.clone();
            b.iter(|| stepper.step(black_box(&mut state), 1e-3, &inc).unwrap());
        });
    }
    group.finish();
}

pub fn observables(c: &mut Criterion) {
    let mut group = c.benchmark_group("measure");
    for (dim, n) in SIZES {
        let p = problem(dim, n);
        group.throughput(Throughput::Elements(p.grid.len() as u64));
        group.bench_with_input(BenchmarkId::new(format!("{dim}d"), n), &p, |b, p| {
            b.iter(|| measure(&p.grid, black_box(&p.initial), &p.coupling, 0));
        });
    }
    group.finish();
}

pub fn ground_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground_state");
    group.sample_size(10);
    for (dim, n) in [(1, 1024), (2, 64)] {
        let grid = scnls_core::Grid::new(dim, n, 20.0).unwrap();
        group.bench_with_input(BenchmarkId::new(format!("{dim}d"), n), &grid, |b, g| {
            b.iter(|| solve_ground_state(1.0, 1.0, g, 1e-10).unwrap());
        });
    }
    group.finish();
}
