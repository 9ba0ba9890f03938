use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use platelab_core::carleman::{characteristic_samples, poisson_bracket, weight_from_profile, QuadraticProfile};
use platelab_core::evolution::{evolve_midpoint, smooth_data};
use platelab_core::model::{assemble_damping, laplacian_eigenpairs};
use platelab_core::spectra::{pencil_spectrum, ResolventSolver, SigmaMethod, DEFAULT_DENSE_CAP};
use platelab_core::{DampingRegion, Geometry, PlateModel};

fn interval(n: usize) -> PlateModel {
    PlateModel::new(
        Geometry::interval(1.0).unwrap(),
        DampingRegion::new(0.3, 1.0).unwrap(),
        n,
    )
    .unwrap()
}

fn damping_assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("damping_assembly");
    let region = DampingRegion::new(0.3, 1.0).unwrap();
    for n in [64, 256] {
        let basis = laplacian_eigenpairs(Geometry::interval(1.0).unwrap(), n).unwrap();
        g.bench_with_input(BenchmarkId::new("1d", n), &basis, |b, basis| {
            b.iter(|| assemble_damping(black_box(basis), &region).unwrap())
        });
    }
    let basis = laplacian_eigenpairs(Geometry::rectangle(1.0, 1.0).unwrap(), 64).unwrap();
    g.bench_function("2d/64", |b| {
        b.iter(|| assemble_damping(black_box(&basis), &region).unwrap())
    });
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut g = c.benchmark_group("pencil_spectrum");
    g.sample_size(10);
    for n in [32, 64, 128] {
        let m = interval(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| pencil_spectrum(black_box(m), DEFAULT_DENSE_CAP).unwrap())
        });
    }
    g.finish();
}

fn resolvent(c: &mut Criterion) {
    let mut g = c.benchmark_group("resolvent_norm");
    g.sample_size(10);
    for n in [64, 128] {
        let m = interval(n);
        for method in [SigmaMethod::Dense, SigmaMethod::InverseIteration] {
            let solver = ResolventSolver::new(&m, method);
            g.bench_with_input(BenchmarkId::new(format!("{method:?}"), n), &solver, |b, s| {
                b.iter(|| s.norm(black_box(40.0)).unwrap())
            });
        }
    }
    g.finish();
}

fn midpoint(c: &mut Criterion) {
    let m = interval(64);
    let s = smooth_data(m.basis(), 2, 0).unwrap();
    c.bench_function("midpoint_1000_steps/64", |b| {
        b.iter(|| evolve_midpoint(&m, black_box(&s), 1e-3, 1.0).unwrap())
    });
}

fn bracket(c: &mut Criterion) {
    let profile = QuadraticProfile {
        constant: 0.1,
        linear: [-1.0, 0.3],
        hessian: [[0.4, 0.1], [0.1, -0.2]],
    };
    let w = weight_from_profile(profile, 2.0, 2).unwrap();
    let points = characteristic_samples(&w, [0.3, 0.6], 100.0, 64).unwrap();
    c.bench_function("poisson_bracket/64", |b| {
        b.iter(|| points.iter().map(|p| poisson_bracket(&w, black_box(p))).sum::<f64>())
    });
}

criterion_group!(benches, damping_assembly, spectrum, resolvent, midpoint, bracket);
criterion_main!(benches);
