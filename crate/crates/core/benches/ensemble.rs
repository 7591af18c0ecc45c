//! Parallel vs sequential ensemble dispatch.
//!
//! `run_ensemble` fans paths out over rayon (with the default `parallel`
//! feature) while `run_ensemble_sequential` always walks them on one
//! thread; both produce bit-identical results, so the only question is
//! speed.  Run with `cargo bench -p homog-core` and compare the two groups;
//! the parallel speedup should approach the physical core count once the
//! per-path work dominates the fork/join overhead (the larger workloads
//! here), and shrink toward 1× on the small ones.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use homog_core::model::{preset_cosine_gradient, ModelParams};
use homog_core::{run_ensemble, run_ensemble_sequential, InitialLaw, IntegratorConfig, Scheme};

fn bench_dispatch(c: &mut Criterion) {
    let params = ModelParams::new(0.5, 1.0, 1).unwrap();
    let drift = preset_cosine_gradient();
    let initial = InitialLaw::FixedPoint { x0: vec![0.25], y0: vec![0.0] };
    let v_bar = [0.0];
    let eps = 0.1;

    let mut group = c.benchmark_group("ensemble");
    for &paths in &[64usize, 512, 2048] {
        // ~2000 steps per path keeps one iteration well under a second
        let mut config = IntegratorConfig::new(5e-3, 10.0, Scheme::SplittingStrang, 9, paths);
        config.records = 11;
        group.throughput(Throughput::Elements((paths * 2000) as u64));
        group.bench_with_input(BenchmarkId::new("parallel", paths), &config, |b, cfg| {
            b.iter(|| run_ensemble(&params, &drift, cfg, eps, &v_bar, &initial).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", paths), &config, |b, cfg| {
            b.iter(|| {
                run_ensemble_sequential(&params, &drift, cfg, eps, &v_bar, &initial).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_dispatch);
criterion_main!(benches);
