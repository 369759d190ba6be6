use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use phlab_core::cone::{certify_partial_hyperbolicity, ConeConfig};
use phlab_core::conjugacy::{solve_hu, SolverConfig};
use phlab_core::diffeo::{PerturbationSpec, PerturbedDiffeo};
use phlab_core::examples;
use phlab_core::grid::{Composer, Grid, GridField, Interpolation};
use phlab_core::par::Exec;
use phlab_core::spectral::spectral_splitting;
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn map() -> PerturbedDiffeo {
    PerturbedDiffeo::new(examples::quartic_symplectic(), &PerturbationSpec::symplectic_double_shear(1e-3)).unwrap()
}

fn composition(c: &mut Criterion) {
    let f = map();
    let grid = Grid::new(4, 16).unwrap();
    let psi = GridField::from_fn(grid, 1, Exec::Sequential, |x| {
        vec![(std::f64::consts::TAU * (x[0] + 2.0 * x[3])).sin()]
    });
    let mut group = c.benchmark_group("compose_forward");
    for (name, exec) in MODES {
        let composer = Composer::new(&f, grid, Interpolation::Trigonometric, exec).unwrap();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(composer.compose_forward(&psi)))
        });
    }
    group.finish();
}

fn cone_grid(c: &mut Criterion) {
    let f = map();
    let sp = spectral_splitting(f.automorphism()).unwrap();
    let mut group = c.benchmark_group("cone_certificate");
    for (name, exec) in MODES {
        let cfg = ConeConfig { exec, ..ConeConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(certify_partial_hyperbolicity(&f, &sp, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let f = map();
    let sp = spectral_splitting(f.automorphism()).unwrap();
    let mut group = c.benchmark_group("solve_hu");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = SolverConfig { grid_n: 8, exec, ..SolverConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(solve_hu(&f, &sp, &cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, composition, cone_grid, solver);
criterion_main!(benches);
