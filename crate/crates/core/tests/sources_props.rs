use proptest::prelude::*;
use raywave_core::quad::{integrate_points, QuadOptions};
use raywave_core::*;

fn re_g0_quadrature(src: &TemporalSource, xi: f64) -> f64 {
    let pts: Vec<f64> = (0..=45).map(|k| k as f64).collect();
    integrate_points(|t| src.eval(t) * (xi * t).cos(), &pts, QuadOptions::tol(1e-15, 1e-12)).value
}

proptest! {
    #[test]
    fn g0_real_part_even_imaginary_part_odd(alpha in 0.1f64..5.0, phi in -1.5f64..1.5, xi in 0.0f64..40.0, t in 0.0f64..5.0) {
        let src = TemporalSource::sine(alpha, phi).unwrap();
        let (a, b) = (src.g0_transform(xi, t), src.g0_transform(-xi, t));
        let s = a.norm().max(1e-300);
        prop_assert!((a.re - b.re).abs() <= 1e-12 * s);
        prop_assert!((a.im + b.im).abs() <= 1e-12 * s);
    }

    #[test]
    fn polynomial_g0_parity(p1 in -2.0f64..2.0, p2 in -2.0f64..2.0, xi in 0.0f64..40.0, t in 0.0f64..5.0) {
        let src = TemporalSource::polynomial(vec![p1, p2, 1.0 - p1 - p2]).unwrap();
        let (a, b) = (src.g0_transform(xi, t), src.g0_transform(-xi, t));
        let s = a.norm().max(1e-300);
        prop_assert!((a - b.conj()).norm() <= 1e-12 * s);
    }

    #[test]
    fn fourier_linear_in_amplitude(a in 0.1f64..10.0, b1 in 0.2f64..3.0, b2 in 0.2f64..3.0, th in 0.0f64..3.1, p0 in -5.0f64..5.0, p1 in -5.0f64..5.0) {
        let one = SpatialSource::new(1.0, b1, b2, th).unwrap();
        let s = SpatialSource::new(a, b1, b2, th).unwrap();
        let (u, v) = (one.fourier([p0, p1]) * a, s.fourier([p0, p1]));
        prop_assert!((u - v).norm() <= 1e-13 * u.norm().max(1e-300));
    }

    #[test]
    fn beta_and_fourier_symmetric_under_reflection(b1 in 0.2f64..3.0, b2 in 0.2f64..3.0, th in 0.0f64..3.1, psi in 0.0f64..6.3, p0 in -5.0f64..5.0, p1 in -5.0f64..5.0) {
        let s = SpatialSource::new(1.0, b1, b2, th).unwrap();
        prop_assert!((s.beta(psi) - s.beta(psi + std::f64::consts::PI)).abs() <= 1e-13);
        prop_assert!((s.fourier([p0, p1]) - s.fourier([-p0, -p1])).norm() <= 1e-14);
        prop_assert!(s.beta(psi) >= s.b_min() - 1e-14 && s.beta(psi) <= s.b_max() + 1e-14);
    }
}

#[test]
fn fourier_at_origin_is_source_mass() {
    let s = SpatialSource::new(1.7, 0.5, 2.0, 0.3).unwrap();
    assert!((s.fourier([0.0, 0.0]).re - 1.7 * 0.5 * 2.0).abs() < 1e-14);
}

#[test]
fn equivalent_sources_at_zero_wavevector() {
    let scales = ScaleParams::new(10.0, 0.1, 1.0, 1.0).unwrap();
    let sp = SpatialSource::new(1.0, 1.0, 2.0, 0.0).unwrap();
    let src = TemporalSource::sine(1.0, 0.0).unwrap();
    let (u1, u2) = equivalent_sources(&scales, &sp, &src, [0.0, 0.0]);
    assert!((u1 - sp.fourier([0.0, 0.0]) * src.integral()).norm() < 1e-12);
    assert!(u2.norm().is_finite());
}

#[test]
fn equivalent_source_u1_matches_quadrature() {
    let scales = ScaleParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
    let w = scales.omega();
    let sp = SpatialSource::new(1.0, 1.0, 2.0, 0.0).unwrap();
    let src = TemporalSource::sine(1.0, 0.0).unwrap();
    let p = [2.0f64.sqrt(), 2.0f64.sqrt()];
    let (u1, _) = equivalent_sources(&scales, &sp, &src, p);
    let want = re_g0_quadrature(&src, w * 2.0) * sp.fourier(p);
    assert!((u1 - want).norm() <= 1e-10 * want.norm());
}
