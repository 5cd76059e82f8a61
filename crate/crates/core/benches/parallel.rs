use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bdlab::diagnostics::{sigma_sweep, SweepConfig};
use bdlab::dynamics::{GrowthScheme, RunOptions};
use bdlab::par::Execution;
use bdlab::presets::InitPreset;
use bdlab::{make_grid, GridSpec, ModelParams};

fn sweep(c: &mut Criterion) {
    let model = ModelParams::default();
    let grid = make_grid(GridSpec::new(1, 8.0, 256)).unwrap();
    let initial = InitPreset {
        width: 0.8,
        offset: 0.75,
        peak_pressure: Some(0.8),
        ..Default::default()
    }
    .build(grid, &model)
    .unwrap();
    let mut group = c.benchmark_group("sigma_sweep");
    group.sample_size(10);
    for (name, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let cfg = SweepConfig {
            grid,
            model: model.clone(),
            sigmas: vec![0.1, 0.01, 0.001, 0.0001],
            initial: initial.clone(),
            options: RunOptions::new(0.1, 0.02),
            q_list: vec![1.0, 2.0],
            shifts: vec![1, 2, 4],
            execution,
        };
        group.bench_function(name, |b| b.iter(|| sigma_sweep(&cfg).unwrap()));
    }
    group.finish();
}

fn step_2d(c: &mut Criterion) {
    let model = ModelParams {
        sigma: 0.01,
        ..Default::default()
    };
    let mut group = c.benchmark_group("brinkman_step_2d");
    group.sample_size(20);
    for n in [64usize, 128, 256] {
        let grid = make_grid(GridSpec::new(2, 8.0, n)).unwrap();
        let s = InitPreset {
            width: 0.8,
            offset: 0.75,
            peak_pressure: Some(0.8),
            ..Default::default()
        }
        .build(grid, &model)
        .unwrap();
        let scheme = GrowthScheme::brinkman(grid, &model).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| scheme.step(s, 1e-4).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, step_2d);
criterion_main!(benches);
