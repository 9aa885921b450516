use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use biphoton::{
    run_retrieval, simulate_ideal, simulate_measurements, wiener_deconvolve, GatingConfig, MeasurementAxes,
    PreprocessConfig, RetrievalConfig, StateConfig,
};

fn chirped_state() -> StateConfig {
    let mut cfg = StateConfig::default();
    cfg.params.chirp_s = -36000.0;
    cfg.params.chirp_i = -43000.0;
    cfg
}

fn retrieval(c: &mut Criterion) {
    let truth = chirped_state().generate().unwrap();
    let set = simulate_ideal(&truth).unwrap();
    let cfg = RetrievalConfig {
        iterations: 100,
        ..Default::default()
    };
    let mut g = c.benchmark_group("retrieval");
    g.sample_size(10);
    g.bench_function("64x64, 100 iterations", |b| {
        b.iter(|| run_retrieval(black_box(&set), &cfg).unwrap())
    });
    g.finish();
}

fn gated_simulation(c: &mut Criterion) {
    let truth = chirped_state().generate().unwrap();
    let axes = MeasurementAxes::for_state(&truth);
    let mut g = c.benchmark_group("gating");
    g.sample_size(10);
    for length in [0.0, 1000.0] {
        let gm = GatingConfig {
            crystal_length_um: length,
            ..Default::default()
        }
        .model()
        .unwrap();
        g.bench_function(format!("four planes, L = {length} um"), |b| {
            b.iter(|| simulate_measurements(black_box(&truth), &gm, &axes).unwrap())
        });
    }
    g.finish();
}

fn wiener(c: &mut Criterion) {
    let truth = chirped_state().generate().unwrap();
    let tt = simulate_ideal(&truth).unwrap().i_tt;
    let cfg = PreprocessConfig::default();
    c.bench_function("wiener deconvolution 64x64", |b| {
        b.iter(|| wiener_deconvolve(black_box(&tt), &cfg).unwrap())
    });
}

criterion_group!(benches, retrieval, gated_simulation, wiener);
criterion_main!(benches);
