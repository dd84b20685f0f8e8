//! Compares the rayon fan-out against the sequential fallback on a
//! sampling-period sweep of the first study scenario.

use chemostat_core::batch::{run_batch, run_batch_sequential, BatchItem};
use chemostat_core::control::{ControllerSpec, ControllerVariant};
use chemostat_core::scenarios::{materialize, scenario, Preset};
use criterion::{criterion_group, criterion_main, Criterion};

fn sweep_items() -> Vec<BatchItem> {
    let s = scenario(Preset::Sim1);
    let m = materialize(&s).expect("benchmark scenario materializes");
    [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.6, 2.0]
        .iter()
        .map(|&t_sample| {
            let controller = ControllerSpec::new(
                ControllerVariant::OutputFeedback,
                m.eq.d_star,
                m.eq.y_star,
                t_sample,
                s.params.d_min,
                s.params.d_max,
            )
            .expect("sweep controller is valid");
            BatchItem {
                label: format!("T={t_sample}"),
                params: s.params.clone(),
                eq: m.eq.clone(),
                controller,
                initial: m.initial.clone(),
                t_end: 40.0,
            }
        })
        .collect()
}

fn bench_batch(c: &mut Criterion) {
    let items = sweep_items();
    let mut group = c.benchmark_group("period_sweep");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| run_batch(&items)));
    group.bench_function("sequential", |b| b.iter(|| run_batch_sequential(&items)));
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
