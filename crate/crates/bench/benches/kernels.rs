use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use raywave_core::special::{erfc, expint_e1, faddeeva, i0_kernel, pole_moment, si_ci};
use raywave_core::*;

fn special(c: &mut Criterion) {
    let z = C64::new(1.3, 0.7);
    c.bench_function("faddeeva", |b| b.iter(|| faddeeva(black_box(z))));
    c.bench_function("erfc", |b| b.iter(|| erfc(black_box(z))));
    c.bench_function("expint_e1", |b| b.iter(|| expint_e1(black_box(z))));
    c.bench_function("si_ci", |b| b.iter(|| si_ci(black_box(z))));
    c.bench_function("i0_kernel", |b| b.iter(|| i0_kernel(black_box(C64::new(2.0, -0.5)), black_box(C64::new(0.3, 1.1)))));
    c.bench_function("pole_moment", |b| b.iter(|| pole_moment(2, 3, black_box(C64::new(0.8, -2.0)), black_box(C64::new(0.0, -1.0)))));
}

fn sources(c: &mut Criterion) {
    let sine = TemporalSource::sine(2.0, 0.4).unwrap();
    let poly = TemporalSource::polynomial(vec![0.2, 0.8]).unwrap();
    c.bench_function("g0_sine", |b| b.iter(|| sine.g0_transform(black_box(7.5), black_box(1.2))));
    c.bench_function("g0_polynomial", |b| b.iter(|| poly.g0_transform(black_box(7.5), black_box(1.2))));
    let sp = SpatialSource::new(1.0, 1.0, 2.0, 0.3).unwrap();
    for (name, mode) in [("profile_closed", ProfileMode::ClosedForm), ("profile_quadrature", ProfileMode::Quadrature)] {
        let pf = ProfileFn::new(sine.clone(), sp, 1.0, mode).unwrap();
        c.bench_function(name, |b| b.iter(|| pf.eval(black_box(0.7), black_box(0.4))));
    }
}

fn geometry(c: &mut Criterion) {
    let lens = VelocityField::gaussian(1.0, vec![Bump { amplitude: -0.4, center: [1.2, 0.0], width: 0.4 }], None).unwrap();
    c.bench_function("ray_lens_t5", |b| b.iter(|| raywave_core::rays::integrate_ray(&lens, black_box(0.1), 5.0, 1e-9)));
    let front = build_front(&lens, 256, &[3.0], FrontOptions::default()).unwrap();
    c.bench_function("locate_branches", |b| b.iter(|| locate_branches(&front, &lens, black_box([2.9, 0.2]), 3.0, 1.2, 1e-3)));
}

fn fields(c: &mut Criterion) {
    let scales = ScaleParams::new(10.0, 0.1, 1.0, 1.0).unwrap();
    let sp = SpatialSource::new(1.0, 1.0, 2.0, 0.0).unwrap();
    let src = TemporalSource::sine(1.0, 0.0).unwrap();
    let one = GridSpec::new(1, 1, [0.3, -0.2], [1.0, 1.0]).unwrap();
    let opts = TransientOptions { tabulate: false, ..Default::default() };
    c.bench_function("transient_cell", |b| b.iter(|| transient_field(&scales, &sp, &src, black_box(one), 0.2, opts)));
}

criterion_group!(benches, special, sources, geometry, fields);
criterion_main!(benches);
