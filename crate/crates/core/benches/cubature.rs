use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stokes_forms::quadrature::integrate_unit_cube_with;
use stokes_forms::stokes::verify_with;
use stokes_forms::{scenario, Execution, QuadratureSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn raw_cubature(c: &mut Criterion) {
    let mut group = c.benchmark_group("cubature-3d");
    let spec = QuadratureSpec::new(8, 8).unwrap();
    let f = |t: &[f64]| Ok((t[0] * t[1]).sin() * (1.0 + t[2]).ln());
    for (label, mode) in MODES {
        group.bench_function(BenchmarkId::new(label, "8x8"), |b| {
            b.iter(|| integrate_unit_cube_with(f, 3, black_box(&spec), mode).unwrap())
        });
    }
    group.finish();
}

fn scenarios(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify");
    group.sample_size(10);
    for (name, quad) in [("hemisphere-in-R3", (12, 4)), ("annulus-two-pieces", (12, 4)), ("divergence-ball-3d", (8, 4))] {
        let s = scenario::builtin(name).unwrap().with_quadrature(QuadratureSpec::new(quad.0, quad.1).unwrap());
        for (label, mode) in MODES {
            group.bench_function(BenchmarkId::new(label, name), |b| b.iter(|| verify_with(black_box(&s), mode)));
        }
    }
    group.finish();
}

criterion_group!(benches, raw_cubature, scenarios);
criterion_main!(benches);
