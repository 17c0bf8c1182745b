use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use dualdet::markov::{self, AsepParams, AsepWindow, InitialData, QtasepParams};
use dualdet::moments::{self, QuadOptions};

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn asep_mc() -> f64 {
    let params = AsepParams::from_tau(0.4).unwrap();
    let window = AsepWindow::around(0, 0);
    markov::mc_expectation(
        |rng, _| {
            let n = markov::simulate_asep(InitialData::Step, &params, &window, 1.0, rng).unwrap().n_x(0);
            0.4f64.powi(n as i32)
        },
        20_000,
        1,
    )
    .unwrap()
    .mean
}

fn nested_moment() -> f64 {
    let p = QtasepParams::homogeneous(0.5, 3).unwrap();
    moments::qtasep_moment(&[3, 2, 1], 0.5, &p, 0.0, QuadOptions::for_dim(3)).unwrap().value.re
}

fn bench_mc(c: &mut Criterion) {
    let mut g = c.benchmark_group("asep_mc_20k");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| black_box(asep_mc())));
    g.bench_function("sequential", |b| b.iter(|| single_thread(|| black_box(asep_mc()))));
    g.finish();
}

fn bench_nested(c: &mut Criterion) {
    let mut g = c.benchmark_group("qtasep_nested_k3");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| black_box(nested_moment())));
    g.bench_function("sequential", |b| b.iter(|| single_thread(|| black_box(nested_moment()))));
    g.finish();
}

criterion_group!(benches, bench_mc, bench_nested);
criterion_main!(benches);
