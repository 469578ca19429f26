use criterion::{criterion_group, criterion_main};

criterion_group!(
    benches,
    scnls_bench::strang_step,
    scnls_bench::observables,
    scnls_bench::ground_state
);
criterion_main!(benches);
