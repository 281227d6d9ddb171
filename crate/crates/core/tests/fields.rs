use raywave_core::*;

fn setup() -> (ScaleParams, SpatialSource, TemporalSource) {
    (ScaleParams::new(10.0, 0.1, 1.0, 1.0).unwrap(), SpatialSource::new(1.0, 1.0, 2.0, 0.3).unwrap(), TemporalSource::sine(1.0, 0.0).unwrap())
}

#[test]
fn transient_converges_in_psi() {
    let (sc, sp, src) = setup();
    let spec = GridSpec::centered(21, 1.0).unwrap();
    let run = |n| transient_field(&sc, &sp, &src, spec, 0.15, TransientOptions { psi_nodes: n, ..Default::default() }).unwrap();
    let (a, b) = (run(256), run(512));
    let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8 * b.max_abs(), "{diff}");
}

#[test]
fn transient_is_localized_near_source() {
    let (sc, sp, src) = setup();
    let spec = GridSpec::centered(41, 4.0).unwrap();
    let f = transient_field(&sc, &sp, &src, spec, 0.2, TransientOptions::default()).unwrap();
    let far = (0..spec.len()).filter(|&i| { let p = spec.point(i); p[0].hypot(p[1]) > 2.0 }).map(|i| f.values[i].abs()).fold(0.0, f64::max);
    assert!(far < 0.05 * f.max_abs());
}

#[test]
fn fields_linear_in_amplitude() {
    let (sc, sp, src) = setup();
    let sp2 = SpatialSource::new(2.5, sp.b1, sp.b2, sp.theta).unwrap();
    let spec = GridSpec::centered(11, 1.5).unwrap();
    let a = transient_field(&sc, &sp, &src, spec, 0.3, TransientOptions::default()).unwrap();
    let b = transient_field(&sc, &sp2, &src, spec, 0.3, TransientOptions::default()).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((2.5 * x - y).abs() <= 1e-12 * b.max_abs());
    }
    let v = VelocityField::constant(1.0).unwrap();
    let front = build_front(&v, 64, &[1.0], FrontOptions::default()).unwrap();
    let opts = PropagatingOptions { band: 0.5, focal_threshold: 1e-3 };
    let pa = propagating_field(&front, &v, &ProfileFn::new(src.clone(), sp, sc.omega(), ProfileMode::ClosedForm).unwrap(), &sc, spec, 1.0, opts).unwrap();
    let pb = propagating_field(&front, &v, &ProfileFn::new(src, sp2, sc.omega(), ProfileMode::ClosedForm).unwrap(), &sc, spec, 1.0, opts).unwrap();
    for i in 0..spec.len() {
        match (pa.get(i), pb.get(i)) {
            (Some(x), Some(y)) => assert!((2.5 * x - y).abs() <= 1e-12 * pb.max_abs().max(1e-300)),
            (None, None) => {}
            _ => panic!("mask differs"),
        }
    }
}

#[test]
fn binary_file_roundtrip() {
    let spec = GridSpec::new(5, 3, [-1.0, 0.5], [0.25, 0.5]).unwrap();
    let cells = (0..spec.len()).map(|i| if i % 4 == 1 { None } else { Some(i as f64 * 0.3 - 1.0) }).collect();
    let g = FieldGrid::from_cells(spec, 1.25, Component::Transient, cells);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eta.rwv");
    g.save(&path).unwrap();
    assert_eq!(FieldGrid::load(&path).unwrap(), g);
}

#[test]
fn energy_is_quadratic() {
    let v = VelocityField::constant(1.2).unwrap();
    let spec = GridSpec::centered(41, 2.0).unwrap();
    let mut eta = FieldGrid::zeros(spec, 0.0, Component::Oracle);
    let mut eta_t = eta.clone();
    assert_eq!(energy(&eta, &eta_t, &v).unwrap(), 0.0);
    for i in 0..spec.len() {
        let p = spec.point(i);
        eta.values[i] = (-(p[0] * p[0] + p[1] * p[1])).exp();
        eta_t.values[i] = p[0] * eta.values[i];
    }
    let e1 = energy(&eta, &eta_t, &v).unwrap();
    eta.scale(2.0);
    eta_t.scale(2.0);
    let e2 = energy(&eta, &eta_t, &v).unwrap();
    assert!(e1 > 0.0 && (e2 - 4.0 * e1).abs() <= 1e-12 * e2);
}

#[test]
fn fd_energy_scales_with_amplitude_squared() {
    let v = VelocityField::constant(1.0).unwrap();
    let run = |a: f64| {
        let mut cfg = FdConfig::homogeneous(2.0, 0.05, 0.5, 0.5, |x| a * (-(x[0] * x[0] + x[1] * x[1]) / 0.09).exp()).unwrap();
        cfg.energy_every = 5;
        solve_fd(&cfg, &v, &[0.5]).unwrap()
    };
    let (r1, r2) = (run(1.0), run(2.0));
    for (a, b) in r1.energies.iter().zip(&r2.energies) {
        assert!((b.staggered - 4.0 * a.staggered).abs() <= 1e-12 * b.staggered);
    }
}

#[test]
fn fd_rejects_cfl_violation_and_small_domain() {
    let v = VelocityField::constant(1.0).unwrap();
    let mut cfg = FdConfig::homogeneous(2.0, 0.05, 0.5, 0.5, |_| 0.0).unwrap();
    cfg.dt = Some(0.05);
    assert!(matches!(solve_fd(&cfg, &v, &[0.5]), Err(FdError::Cfl { .. })));
    let cfg = FdConfig::homogeneous(1.0, 0.05, 2.0, 0.5, |_| 0.0).unwrap();
    assert!(matches!(solve_fd(&cfg, &v, &[2.0]), Err(FdError::Domain { .. })));
}
