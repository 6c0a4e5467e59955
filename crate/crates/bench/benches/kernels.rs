//! Timings of the inner kernels: map evaluation, interpolation tables,
//! Lyapunov-Perron solves, the transfer cocycle and the conjugacy.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use partlin::catalog;
use partlin::lp::{solve_unstable_lp, LPConfig};
use partlin::pipeline::Chebyshev;
use partlin::{DiscreteMap, Projection};
use partlin_bench::{poly3, sample_point, twou4};

fn map_kernels(c: &mut Criterion) {
    let m = catalog::poly3();
    let x = sample_point(3, 0.2);
    c.bench_function("poly3_eval", |b| b.iter(|| m.eval(black_box(&x)).unwrap()));
    c.bench_function("poly3_inverse", |b| b.iter(|| m.inverse(black_box(&x)).unwrap()));
    c.bench_function("poly3_jacobian", |b| b.iter(|| m.jacobian(black_box(&x)).unwrap()));
}

fn chebyshev(c: &mut Criterion) {
    let table = Chebyshev::fit(
        |y| Ok(nalgebra::DVector::from_vec(vec![(y[0] + 2.0 * y[1]).sin(), y[0] * y[1]])),
        2,
        2,
        12,
        0.3,
    )
    .unwrap();
    let x = sample_point(2, 0.2);
    c.bench_function("chebyshev_eval", |b| b.iter(|| table.eval(black_box(&x))));
    c.bench_function("chebyshev_eval_with_jacobian", |b| b.iter(|| table.eval_with_jacobian(black_box(&x))));
}

fn lp_solve(c: &mut Criterion) {
    let m = catalog::poly3();
    let cfg = LPConfig::unstable_default(&m.structure().envelopes);
    let x = sample_point(3, 0.2);
    let z = sample_point(1, 0.1);
    c.bench_function("unstable_lp_poly3", |b| {
        b.iter(|| solve_unstable_lp(&m, black_box(&x), black_box(&z), &cfg).unwrap())
    });
}

fn conjugacy(c: &mut Criterion) {
    let lin = poly3();
    let y = sample_point(3, 0.2);
    c.bench_function("conjugacy_poly3", |b| b.iter(|| lin.conjugacy(black_box(&y)).unwrap()));
    c.bench_function("conjugacy_inverse_poly3", |b| {
        b.iter(|| lin.conjugacy_inverse(black_box(&y)).unwrap())
    });
}

fn transfer(c: &mut Criterion) {
    let lin = twou4();
    let engine = lin.reduction.engine().expect("transfer engine");
    let s = lin.normal_form.structure().clone();
    let x = s.split(&sample_point(s.dim(), 0.2), Projection::CS).unwrap();
    // Uncached: distinct stable coordinates each iteration.
    let mut k = 0u64;
    c.bench_function("transfer_cocycle_twou4", |b| {
        b.iter(|| {
            k += 1;
            let mut p = x.clone();
            p[0] += 1e-9 * k as f64;
            engine.compute(black_box(&p)).unwrap()
        })
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(20);
    targets = map_kernels, chebyshev, lp_solve, conjugacy, transfer
}
criterion_main!(kernels);
