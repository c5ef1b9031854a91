//! Timings for the operator kernels that dominate the sweeps.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vdwlab_bench::{hydrogen_pair, test_vector};
use vdwlab_core::feshbach::{build_p, FeshbachProblem};
use vdwlab_core::spectral::ground_state;
use vdwlab_core::vdw::{kernel_taylor, KronSum};
use vdwlab_core::{assemble_full, build_grid, LinearOperator, SystemSpec};

const TOL: f64 = 1e-10;

fn operator_apply(c: &mut Criterion) {
    let spec = hydrogen_pair(101, 12.5, 8.0).unwrap();
    let h = assemble_full(&spec).unwrap();
    let x = test_vector(h.dim());
    let mut y = vec![0.0; h.dim()];
    c.bench_function("many_body_apply_101x101", |b| b.iter(|| h.apply(black_box(&x), &mut y)));

    let atom = SystemSpec::single_well(build_grid(101, (-12.5, 12.5)).unwrap(), 1, 1);
    let one = assemble_full(&atom).unwrap();
    let k = KronSum::new(vec![&one, &one], -1.0);
    let x = test_vector(k.dim());
    let mut y = vec![0.0; k.dim()];
    c.bench_function("kron_sum_apply_101x101", |b| b.iter(|| k.apply(black_box(&x), &mut y)));
}

fn ground_states(c: &mut Criterion) {
    let spec = hydrogen_pair(81, 10.0, 8.0).unwrap();
    let h = assemble_full(&spec).unwrap();
    let mut group = c.benchmark_group("spectral");
    group.sample_size(10);
    group.bench_function("lanczos_ground_state_81x81", |b| {
        b.iter(|| ground_state(&h, TOL).unwrap())
    });
    group.finish();
}

fn feshbach(c: &mut Criterion) {
    let spec = hydrogen_pair(81, 10.0, 8.0).unwrap();
    let h = assemble_full(&spec).unwrap();
    let p = build_p(&spec, 1.0 / 6.0, None, TOL).unwrap();
    let x = test_vector(h.dim());
    let mut group = c.benchmark_group("feshbach");
    group.sample_size(10);
    group.bench_function("project_81x81", |b| b.iter(|| p.project(black_box(&x))));
    let problem = FeshbachProblem::new(&h, p.active(), None).unwrap();
    let lambda0 = problem.php().symmetric_eigenvalues().min();
    let lambda = problem.solve_fixed_point(lambda0).unwrap().energy;
    group.bench_function("map_81x81", |b| b.iter(|| problem.map(black_box(lambda)).unwrap()));
    group.finish();
}

fn taylor(c: &mut Criterion) {
    c.bench_function("kernel_taylor_n6", |b| {
        b.iter(|| {
            (0..=6)
                .map(|n| kernel_taylor(black_box(14.0), 1.0, n).unwrap())
                .sum::<f64>()
        })
    });
}

criterion_group!(benches, operator_apply, ground_states, feshbach, taylor);
criterion_main!(benches);
