use criterion::{black_box, criterion_group, criterion_main, Criterion};
use optipace_core::{
    backward_sweep, forward_pass, reference_subject, scenarios, BikeParams, Course, DpConfig,
    DynamicsVariant, KinematicState, RideModel, ValueRetention,
};

fn model() -> RideModel {
    RideModel::new(reference_subject(14).unwrap(), BikeParams::default(), DynamicsVariant::Road)
        .unwrap()
}

fn kernels(c: &mut Criterion) {
    let m = model();
    let start = KinematicState { s: 0.0, v: 8.0, t: 0.0 };
    c.bench_function("u_max_velocity", |b| {
        b.iter(|| m.u_max_velocity(black_box(8.0), black_box(4000.0)).unwrap())
    });
    c.bench_function("step_single", |b| {
        b.iter(|| m.step(start, black_box(4000.0), black_box(300.0), 0.02, 10.0).unwrap())
    });
    let slow = KinematicState { v: 1.0, ..start };
    c.bench_function("step_substepped", |b| {
        b.iter(|| m.step(slow, black_box(4000.0), black_box(500.0), 0.0, 10.0).unwrap())
    });
}

fn sweeps(c: &mut Criterion) {
    let m = model();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);

    let toy = scenarios::rolling(1000.0, &[(6.0, 500.0, 0.0)]);
    let cfg = DpConfig {
        ds: 25.0,
        n_v: 30,
        n_w: 40,
        retain_values: ValueRetention::Initial,
        ..DpConfig::default()
    };
    group.bench_function("toy_30x40", |b| {
        b.iter(|| backward_sweep(black_box(&toy), &m, &cfg).unwrap())
    });

    // 20 stages at the full grid; per-stage cost scales linearly to 18 km.
    let short = Course::from_points(vec![(0.0, 0.0), (100.0, 3.0), (200.0, 0.0)]).unwrap();
    let full = DpConfig {
        retain_values: ValueRetention::Initial,
        ..DpConfig::default()
    };
    group.bench_function("full_grid_20_stages", |b| {
        b.iter(|| backward_sweep(black_box(&short), &m, &full).unwrap())
    });

    let sol = backward_sweep(&toy, &m, &cfg).unwrap();
    group.bench_function("forward_pass_toy", |b| {
        b.iter(|| forward_pass(&sol, black_box(&toy), 1.0, m.rider.awc()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kernels, sweeps);
criterion_main!(benches);
