use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cuesim::batch::{randomized_configs, run_many, run_many_sequential};
use cuesim::config::RunConfig;

fn batch(c: &mut Criterion) {
    let mut base = RunConfig::default();
    base.run.duration_s = 10.0;

    let mut group = c.benchmark_group("batch_10s_runs");
    group.sample_size(10);
    for n in [4usize, 16] {
        let configs = randomized_configs(&base, n, 1);
        group.bench_with_input(BenchmarkId::new("sequential", n), &configs, |b, cfgs| {
            b.iter(|| run_many_sequential(cfgs))
        });
        // Without the `parallel` feature this is the same sequential loop.
        group.bench_with_input(BenchmarkId::new("run_many", n), &configs, |b, cfgs| {
            b.iter(|| run_many(cfgs))
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
