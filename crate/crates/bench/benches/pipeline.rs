use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tdr_core::optimize::{surface_scan, Axis, ScanModel, ScanParam, ScanSpec};
use tdr_core::readout::gaussian_signal;
use tdr_core::reservoir::{run_continuous, run_discrete};
use tdr_core::{
    InputMask, Kernel, LyapunovMethod, McSettings, MemoryTask, NeuronLayer, OperatingPoint, ReservoirConfig, Setup,
    SimModel,
};

fn setup(n: usize) -> Setup {
    Setup {
        reservoir: ReservoirConfig::new(n, 0.4).unwrap(),
        kernel: Kernel::mackey_glass(1.0781, 0.796, 2.0),
        mask: InputMask::uniform(n, -1.0, 1.0, 7).unwrap(),
        task: MemoryTask::lagged_squares(3),
        sigma_z: 0.01,
        lambda: 1e-15,
        taylor_order: 8,
        operating_point: OperatingPoint::Largest,
        input_bias: 0.0,
    }
}

fn equilibria(c: &mut Criterion) {
    let k = Kernel::ikeda(1.2443, 1.4762, 0.1161);
    let (lo, hi) = k.equilibrium_search_interval();
    c.bench_function("ikeda equilibria", |b| b.iter(|| k.find_equilibria(black_box(lo), black_box(hi))));
}

fn simulation(c: &mut Criterion) {
    let s = setup(20);
    let x0 = s.operating_equilibrium().unwrap().x0();
    let signal = gaussian_signal(1_000, 0.01, 1).unwrap();
    let init = NeuronLayer::constant(0, 20, x0);
    let mut g = c.benchmark_group("simulate 1000 layers");
    g.bench_function("discrete", |b| {
        b.iter(|| run_discrete(&s.reservoir, &s.kernel, &s.mask, black_box(&signal), &init).unwrap())
    });
    g.bench_function("continuous", |b| {
        b.iter(|| run_continuous(&s.reservoir, &s.kernel, &s.mask, black_box(&signal), x0).unwrap())
    });
    g.finish();
}

fn capacity(c: &mut Criterion) {
    let mut g = c.benchmark_group("closed-form capacity");
    for n in [5usize, 20, 40] {
        let s = setup(n);
        for (name, method) in [("kronecker", LyapunovMethod::Kronecker), ("doubling", LyapunovMethod::Doubling)] {
            if n > 20 && method == LyapunovMethod::Kronecker {
                continue;
            }
            g.bench_with_input(BenchmarkId::new(name, n), &s, |b, s| b.iter(|| s.theoretical(method).unwrap()));
        }
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let s = setup(20);
    let mc = McSettings { t_train: 8_000, t_test: 2_000, seed: 3, ..McSettings::default() };
    let mut g = c.benchmark_group("monte carlo 10k");
    g.sample_size(10);
    for model in [SimModel::Discrete, SimModel::Linearized] {
        g.bench_function(model.name(), |b| b.iter(|| s.monte_carlo(model, &mc).unwrap()));
    }
    g.finish();
}

fn scan(c: &mut Criterion) {
    let spec = ScanSpec {
        base: setup(20),
        axis1: Axis { param: ScanParam::D, min: 0.1, max: 1.0, steps: 4 },
        axis2: Some(Axis { param: ScanParam::Gamma, min: 0.2, max: 2.0, steps: 4 }),
        models: vec![ScanModel::Theoretical],
        mc: McSettings::default(),
    };
    let mut g = c.benchmark_group("surface");
    g.sample_size(10);
    g.bench_function("4x4 theoretical", |b| b.iter(|| surface_scan(black_box(&spec)).unwrap()));
    g.finish();
}

criterion_group!(benches, equilibria, simulation, capacity, monte_carlo, scan);
criterion_main!(benches);
