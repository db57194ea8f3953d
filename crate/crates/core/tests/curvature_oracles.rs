use num_complex::Complex64;
use proptest::prelude::*;
use rcpl_core::curvature::{chern_curvature_at, curvature_fd_oracle, second_ricci_at};
use rcpl_core::expr::Expression;
use rcpl_core::synthetic::{random_point, random_polynomial_spec, rng};
use rcpl_core::{BundleSpec, CurvatureTensor};

fn z(a: f64, b: f64) -> Complex64 {
    Complex64::new(a, b)
}

fn rel_diff(a: &CurvatureTensor<f64>, b: &CurvatureTensor<f64>) -> f64 {
    a.sub(b).max_abs() / a.max_abs().max(1.0)
}

#[test]
fn fubini_study_taylor_values() {
    // h = 1/(1+|z|²)² ≈ 1 − 2|z|², so R = −∂∂̄h = 2 at the origin.
    let fs = BundleSpec::parse(1, 1, &["(1+abs2(z1))^(-2)"]).unwrap();
    let r = chern_curvature_at::<f64>(&fs, &[z(0.0, 0.0)]).unwrap();
    assert!((r.get(0, 0, 0, 0).re - 2.0).abs() < 1e-12);
    // Away from the origin the curvature is 2·h.
    let p = [z(0.4, -0.3)];
    let r = chern_curvature_at::<f64>(&fs, &p).unwrap();
    let h = 1.0 / (1.0f64 + 0.25).powi(2);
    assert!((r.get(0, 0, 0, 0).re - 2.0 * h * h).abs() < 1e-12);
}

#[test]
fn poincare_disk_is_negative() {
    let disk = BundleSpec::parse(1, 1, &["(1-abs2(z1))^(-2)"]).unwrap();
    let r = chern_curvature_at::<f64>(&disk, &[z(0.0, 0.0)]).unwrap();
    assert!((r.get(0, 0, 0, 0).re + 2.0).abs() < 1e-12);
}

#[test]
fn ad_matches_finite_differences_on_random_specs() {
    let mut g = rng(11);
    for _ in 0..25 {
        let n = 1 + (rand::Rng::random_range(&mut g, 0..2usize));
        let r = 1 + (rand::Rng::random_range(&mut g, 0..2usize));
        let spec = random_polynomial_spec(&mut g, n, r).unwrap();
        let p = random_point(&mut g, n, 0.5);
        let ad = chern_curvature_at::<f64>(&spec, &p).unwrap();
        let fd = curvature_fd_oracle::<f64>(&spec, &p, 1e-3).unwrap();
        assert!(
            rel_diff(&ad, &fd) < 1e-6,
            "spec {:?}",
            spec.h_entries().iter().map(|e| e.to_string()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn f32_tracks_f64() {
    let spec = random_polynomial_spec(&mut rng(5), 2, 2).unwrap();
    let p = [z(0.1, 0.2), z(-0.3, 0.05)];
    let p32: Vec<num_complex::Complex32> = p
        .iter()
        .map(|w| num_complex::Complex32::new(w.re as f32, w.im as f32))
        .collect();
    let a = chern_curvature_at::<f64>(&spec, &p).unwrap();
    let b = chern_curvature_at::<f32>(&spec, &p32).unwrap();
    let scale = a.max_abs().max(1.0);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        assert!((x - Complex64::new(y.re as f64, y.im as f64)).norm() < 1e-4 * scale);
    }
}

#[test]
fn second_ricci_of_trivial_twist() {
    // h = e^{-|z|²} I₂ has R_{11̄αβ̄} = h_{αβ̄}, so the trace over ω = 1 is h.
    let spec = BundleSpec::parse(1, 2, &["exp(-abs2(z1))", "0", "0", "exp(-abs2(z1))"])
        .unwrap()
        .with_omega(vec![Expression::parse("1", 1).unwrap()])
        .unwrap();
    let s = second_ricci_at::<f64>(&spec, &[z(0.3, 0.1)]).unwrap();
    let h = (-0.1f64).exp();
    assert!((s[(0, 0)].re - h).abs() < 1e-12 && (s[(1, 1)].re - h).abs() < 1e-12);
    assert!(s[(0, 1)].norm() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn curvature_is_hermitian(seed in 0u64..10_000, a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let spec = random_polynomial_spec(&mut rng(seed), 2, 2).unwrap();
        let r = chern_curvature_at::<f64>(&spec, &[z(a, b), z(b, -a)]).unwrap();
        prop_assert!(r.hermitian_defect() <= 1e-9 * r.max_abs().max(1.0));
    }

    #[test]
    fn scaling_the_metric_leaves_curvature_form_invariant(seed in 0u64..10_000, c in 0.2f64..5.0) {
        // R(ch) = c·R(h) componentwise.
        let spec = random_polynomial_spec(&mut rng(seed), 1, 2).unwrap();
        let scaled = spec.map_metric(|e| Expression::parse(&format!("{c}*({e})"), 1).unwrap()).unwrap();
        let p = [z(0.2, -0.1)];
        let a = chern_curvature_at::<f64>(&spec, &p).unwrap().scale(c);
        let b = chern_curvature_at::<f64>(&scaled, &p).unwrap();
        prop_assert!(rel_diff(&a, &b) < 1e-10);
    }
}
