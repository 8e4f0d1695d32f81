use std::f64::consts::PI;

use fractal_paths::deviation::{
    covariant_rate, coordinate_rate, default_oracle_epsilon, integrate_deviation, relative_sup_error,
    two_geodesic_oracle, DeviationState,
};
use fractal_paths::geometry::{Minkowski, Schwarzschild};
use fractal_paths::motion::{schwarzschild_circular_orbit, ParticleState};
use fractal_paths::ChartPoint;
use nalgebra::Vector4;

fn one_orbit() -> f64 {
    let ut = 1.0 / 0.5f64.sqrt();
    2.0 * PI * 6.0f64.powf(1.5) / ut
}

#[test]
fn radial_deviation_matches_two_geodesic_oracle() {
    let m = Schwarzschild::new(1.0).unwrap();
    let base = schwarzschild_circular_orbit(1.0, 6.0).unwrap();
    let psi0 = Vector4::new(0.0, 1.0, 0.0, 0.0);
    let w0 = Vector4::zeros();
    let s_end = one_orbit();
    let paired = integrate_deviation(&m, &base, &DeviationState::new(psi0, w0), s_end, 0.1).unwrap();
    let oracle = two_geodesic_oracle(&m, &base, &psi0, &w0, default_oracle_epsilon(&m), s_end, 0.1).unwrap();
    let err = relative_sup_error(&paired.deviation, &oracle).unwrap();
    assert!(err < 1e-3, "relative error {err}");
    assert!(paired.base.norm_drift() < 1e-9);
}

#[test]
fn flat_deviation_is_affine() {
    let base = ParticleState::new(0.0, ChartPoint::new(0.0, 0.0, 0.0, 0.0), Vector4::new(1.25, 0.75, 0.0, 0.0));
    let psi0 = Vector4::new(0.3, -1.0, 2.0, 0.5);
    let w0 = Vector4::new(0.1, 0.2, -0.3, 0.4);
    let p = integrate_deviation(&Minkowski, &base, &DeviationState::new(psi0, w0), 3.0, 0.1).unwrap();
    for (st, d) in p.base.states.iter().zip(&p.deviation) {
        assert!((d.psi - (psi0 + w0 * st.s)).amax() < 1e-13);
        assert_eq!(d.w, w0);
    }
    let oracle = two_geodesic_oracle(&Minkowski, &base, &psi0, &w0, 1e-6, 3.0, 0.1).unwrap();
    // Oracle error is round-off amplified by 1/eps.
    assert!(relative_sup_error(&p.deviation, &oracle).unwrap() < 1e-8);
}

#[test]
fn deviation_is_linear_in_initial_data() {
    let m = Schwarzschild::new(1.0).unwrap();
    let base = schwarzschild_circular_orbit(1.0, 7.0).unwrap();
    let a = DeviationState::new(Vector4::new(0.0, 1.0, 0.0, 0.0), Vector4::new(0.0, 0.0, 0.01, 0.0));
    let b = DeviationState::new(Vector4::new(0.5, 0.0, 0.2, 0.1), Vector4::new(0.0, -0.02, 0.0, 0.003));
    let (ka, kb) = (2.5, -1.5);
    let combo = DeviationState::new(a.psi * ka + b.psi * kb, a.w * ka + b.w * kb);
    let run = |d: &DeviationState| integrate_deviation(&m, &base, d, 30.0, 0.1).unwrap().deviation;
    let (ra, rb, rc) = (run(&a), run(&b), run(&combo));
    for ((x, y), z) in ra.iter().zip(&rb).zip(&rc) {
        let expected = x.psi * ka + y.psi * kb;
        assert!((z.psi - expected).amax() < 1e-10 * expected.amax().max(1.0));
    }
}

#[test]
fn oracle_richardson_check() {
    let m = Schwarzschild::new(1.0).unwrap();
    let base = schwarzschild_circular_orbit(1.0, 6.0).unwrap();
    let psi0 = Vector4::new(0.0, 1.0, 0.0, 0.0);
    let w0 = Vector4::new(0.0, 0.0, 0.0, 0.001);
    let run = |eps: f64| two_geodesic_oracle(&m, &base, &psi0, &w0, eps, 20.0, 0.1).unwrap();
    let (e1, e2) = (1e-4, 5e-5);
    let diff = relative_sup_error(&run(e1), &run(e2)).unwrap();
    // First-order validity: the gap is O(eps) and shrinks with eps.
    assert!(diff < 10.0 * e1, "gap {diff}");
    let diff_small = relative_sup_error(&run(e2), &run(e2 / 2.0)).unwrap();
    assert!(diff_small < diff);
}

#[test]
fn deviation_endpoint_converges_at_fourth_order() {
    let m = Schwarzschild::new(1.0).unwrap();
    let mut base = schwarzschild_circular_orbit(1.0, 6.0).unwrap();
    base.u[1] = 0.02;
    let dev = DeviationState::new(Vector4::new(0.0, 1.0, 0.0, 0.0), Vector4::zeros());
    let end = |h: f64| *integrate_deviation(&m, &base, &dev, 60.0, h).unwrap().deviation.last().unwrap();
    let reference = end(0.05);
    let err = |h: f64| (end(h).psi - reference.psi).amax();
    let ratio = err(2.0) / err(1.0);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn covariant_and_coordinate_rates_round_trip() {
    let m = Schwarzschild::new(1.0).unwrap();
    let base = ParticleState::new(0.0, ChartPoint::new(0.0, 8.0, 1.0, 0.2), Vector4::new(1.2, 0.1, 0.02, 0.03));
    let dev = DeviationState::new(Vector4::new(0.1, 1.0, -0.2, 0.3), Vector4::new(0.0, 0.5, 0.1, -0.1));
    let p = covariant_rate(&m, &base, &dev).unwrap();
    let w = coordinate_rate(&m, &base, &dev.psi, &p).unwrap();
    assert!((w - dev.w).amax() < 1e-15);
}

#[test]
fn csv_carries_oracle_columns() {
    let base = ParticleState::new(0.0, ChartPoint::new(0.0, 0.0, 0.0, 0.0), Vector4::new(1.0, 0.0, 0.0, 0.0));
    let dev = DeviationState::new(Vector4::new(0.0, 1.0, 0.0, 0.0), Vector4::new(0.0, 0.0, 1.0, 0.0));
    let p = integrate_deviation(&Minkowski, &base, &dev, 2.0, 0.5).unwrap();
    let oracle = two_geodesic_oracle(&Minkowski, &base, &dev.psi, &dev.w, 1e-6, 2.0, 0.5).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf, Some(&oracle)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("s,Psi0,Psi1,Psi2,Psi3,W0,W1,W2,W3,"));
    assert!(header.contains("oPsi0"));
    assert_eq!(text.lines().count(), 6);
    let last = p.deviation.last().unwrap();
    assert_eq!(last.psi, Vector4::new(0.0, 1.0, 2.0, 0.0));
}
