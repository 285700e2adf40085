//! Rayon against the sequential path on the three batch workloads. Both arms
//! run in the same binary through `par::map` and `par::map_seq`; build with
//! `--no-default-features` to see `map` fall back to the sequential path.

use criterion::{criterion_group, criterion_main, Criterion};
use epigame_core::basin::lattice_grid;
use epigame_core::integrator::{integrate, IntegratorConfig};
use epigame_core::model::{ClassSpec, ModelParams, ResponseSpec, State};
use epigame_core::par;
use epigame_core::stochastic::{simulate_ctmc, Counts, CtmcConfig};
use epigame_core::trace::{run_trace_experiment, synthetic_trace, InitialCondition, TraceExperiment};
use std::hint::black_box;

fn basin(c: &mut Criterion) {
    let p = ModelParams::new(1.0, 1.0, 0.5).unwrap();
    let spec = ResponseSpec::step(0.5);
    let grid = lattice_grid(20);
    let cfg = IntegratorConfig {
        keep_samples: false,
        ..Default::default()
    };
    let one = |x0: &State| integrate(&p, &spec, *x0, &cfg).unwrap().final_state();
    let mut g = c.benchmark_group("basin_210");
    g.bench_function("rayon", |b| b.iter(|| black_box(par::map(&grid, one))));
    g.bench_function("sequential", |b| b.iter(|| black_box(par::map_seq(&grid, one))));
    g.finish();
}

fn ctmc(c: &mut Criterion) {
    let p = ModelParams::new(1.0, 1.0, 0.5).unwrap();
    let spec = ResponseSpec::sigmoid(0.5, 0.001);
    let pop = Counts::from_fractions(1000, State::new(0.99, 0.01).unwrap());
    let cfg = CtmcConfig {
        t_max: 50.0,
        sample_interval: 0.5,
    };
    let runs: Vec<u64> = (0..16).collect();
    let one = |r: &u64| simulate_ctmc(&p, &spec, pop, &cfg, 1, *r).unwrap().final_t;
    let mut g = c.benchmark_group("ctmc_16x1000");
    g.bench_function("rayon", |b| b.iter(|| black_box(par::map(&runs, one))));
    g.bench_function("sequential", |b| b.iter(|| black_box(par::map_seq(&runs, one))));
    g.finish();
}

fn trace(c: &mut Criterion) {
    let hr = 3600.0;
    let trace = synthetic_trace(41, 1.0 / (41.0 * hr), 72.0 * hr, 60.0, 2024).unwrap();
    let exp = TraceExperiment {
        gamma: 1.0 / (6.0 * hr),
        delta: 1.0 / (6.0 * hr),
        classes: vec![ClassSpec {
            weight: 1.0,
            response: ResponseSpec::sigmoid(0.9, 0.001),
        }],
        initial: InitialCondition::SingleInfected { infected_class: 0 },
        runs: 1,
        transient_cut: None,
        grid_step: 60.0,
    };
    // one single-run experiment per seed, so the batch is split the same
    // way as the runs inside run_trace_experiment
    let seeds: Vec<u64> = (0..30).collect();
    let one = |s: &u64| run_trace_experiment(&trace, &exp, *s).unwrap().runs[0].mean_i_total;
    let mut g = c.benchmark_group("trace_30_runs");
    g.bench_function("rayon", |b| b.iter(|| black_box(par::map(&seeds, one))));
    g.bench_function("sequential", |b| b.iter(|| black_box(par::map_seq(&seeds, one))));
    g.finish();
}

criterion_group!(benches, basin, ctmc, trace);
criterion_main!(benches);
