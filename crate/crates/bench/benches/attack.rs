use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tkmia::attack::{tkmia_attack, tkmia_objective};
use tkmia::baselines::{run_baseline, Baseline, BaselineSpec};
use tkmia::metrics::MetricsRecord;
use tkmia_bench::fixture;

fn objective(c: &mut Criterion) {
    let fx = fixture();
    let (inst, s) = &fx.targets[0];
    let relevant = inst.relevant();
    let eps = vec![0.01; inst.x.len()];
    c.bench_function("tkmia_objective", |b| {
        b.iter(|| tkmia_objective(&fx.model, black_box(&inst.x), &eps, 0.1, 0.1, s, &relevant, &fx.config).unwrap())
    });
}

fn attacks(c: &mut Criterion) {
    let fx = fixture();
    let batch = &fx.targets[..fx.targets.len().min(16)];
    let mut group = c.benchmark_group("attack_16_instances");
    group.sample_size(10);
    group.bench_function("tkmia", |b| {
        b.iter(|| {
            for (inst, s) in batch {
                black_box(tkmia_attack(&fx.model, inst, s, &fx.config).unwrap());
            }
        })
    });
    for method in [Baseline::MlCwU, Baseline::TkmlApU] {
        let spec = BaselineSpec { method, config: fx.config.clone() };
        group.bench_function(method.method().tag(), |b| {
            b.iter(|| {
                for (inst, s) in batch {
                    black_box(run_baseline(&fx.model, inst, s, &spec).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let fx = fixture();
    let scored: Vec<_> = fx.targets.iter().map(|(i, _)| (fx.model.outputs(&i.x).unwrap(), &i.y)).collect();
    c.bench_function("metrics_record", |b| {
        b.iter(|| {
            for (f, y) in &scored {
                black_box(MetricsRecord::evaluate(f, y, 3).unwrap());
            }
        })
    });
}

criterion_group!(benches, objective, attacks, metrics);
criterion_main!(benches);
