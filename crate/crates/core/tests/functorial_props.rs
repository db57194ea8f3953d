use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rcpl_core::expr::Expression;
use rcpl_core::functorial::{
    build_cutoff, conformal_curvature, perturb_metric, tensor_power_curvature, tensor_power_form, twist_threshold,
    twisted_form,
};
use rcpl_core::linalg::{hermitian_eigen, unitary_frame};
use rcpl_core::positivity::{certify_point, certify_points};
use rcpl_core::synthetic::{random_hermitian_tensor, random_hpd, random_point, random_polynomial_spec, rng};
use rcpl_core::{chern_curvature_at, BundleSpec, CMatrix, Error, SampleGrid, SearchBudget};

fn unit(v: Vec<Complex64>) -> Vec<Complex64> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

#[test]
fn conformal_change_matches_direct_differentiation() {
    let mut g = rng(31);
    for case in 0..20 {
        let n = 1 + case % 2;
        let spec = random_polynomial_spec(&mut g, n, 2).unwrap();
        let a: f64 = g.random_range(-1.0..1.0);
        let f_src = if n == 1 {
            format!("{a}*abs2(z1) + 0.1*abs2(z1)^2")
        } else {
            format!("{a}*abs2(z1) + log(1 + abs2(z2)) + 0.2*(z1*conj(z2) + z2*conj(z1))")
        };
        let f = Expression::parse(&f_src, n).unwrap();
        let scaled = spec
            .map_metric(|e| Expression::parse(&format!("exp(-({f_src}))*({e})"), n).unwrap())
            .unwrap();
        let p = random_point(&mut g, n, 0.5);
        let direct = chern_curvature_at::<f64>(&scaled, &p).unwrap();
        let r = chern_curvature_at::<f64>(&spec, &p).unwrap();
        let h = spec.metric_at(&p).unwrap();
        let via = conformal_curvature(&r, &h, &f.eval_jet(&p).unwrap()).unwrap();
        assert!(
            direct.sub(&via).max_abs() <= 1e-8 * direct.max_abs().max(1.0),
            "case {case}"
        );
    }
}

#[test]
fn tensor_power_lambda_min_is_additive() {
    let mut g = rng(41);
    for case in 0..50 {
        let r = 1 + case % 4;
        let m = 1 + (case % 3) as u32;
        let n = 2;
        let t = random_hermitian_tensor(&mut g, n, r, 1.0);
        let h = random_hpd(&mut g, r, 0.5);
        let u = unit(random_point(&mut g, n, 1.0));
        let q = t.form_in_base_direction(&u).congruence(&unitary_frame(&h).unwrap());
        let base = hermitian_eigen(&q).unwrap().min();
        let big = tensor_power_form(&t, &h, m, &u).unwrap();
        let lm = hermitian_eigen(&big).unwrap().min();
        assert!(
            (lm - m as f64 * base).abs() < 1e-9,
            "case {case}: {lm} vs {}",
            m as f64 * base
        );
    }
}

#[test]
fn tensor_power_certificate_scales() {
    let mut g = rng(5);
    let budget = SearchBudget::default();
    for _ in 0..5 {
        let t = random_hermitian_tensor(&mut g, 2, 2, 1.0);
        let h = random_hpd(&mut g, 2, 0.5);
        let eye = CMatrix::identity(2);
        let c1 = certify_point(0, vec![], &t, &eye, &h, &budget).unwrap().c_uniform;
        let big = tensor_power_curvature(&t, &h, 2).unwrap();
        let c2 = certify_point(0, vec![], &big, &eye, &CMatrix::identity(4), &budget)
            .unwrap()
            .c_uniform;
        assert!(c2 >= 2.0 * c1 - 1e-6, "{c2} < 2·{c1}");
    }
}

#[test]
fn twisted_form_meets_threshold() {
    let mut g = rng(51);
    for case in 0..20 {
        let c: f64 = g.random_range(0.05..2.0);
        let b: f64 = g.random_range(0.0..3.0);
        let k: u32 = g.random_range(1..4);
        let tb = twist_threshold(c, b, k).unwrap();
        assert!(tb.normalized_margin >= 1.0 - 1e-12);
        assert!(tb.margin >= c - 1e-12);
        // A tensor with λ_min(Q_u) = C at the chosen u, and the worst line
        // curvature R^L(u,ū) = −B.
        let t = rcpl_core::CurvatureTensor::from_fn(1, 2, |_, _, a, bb| {
            if a == bb {
                Complex64::new(if a == 0 { c } else { c + 1.0 }, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let h = CMatrix::identity(2);
        if 2u64.pow(tb.m_min) > 4096 {
            continue;
        }
        let form = twisted_form(&t, &h, tb.m_min, &[Complex64::new(1.0, 0.0)], -b, k).unwrap();
        let lm = hermitian_eigen(&form).unwrap().min();
        assert!(lm >= tb.bound(tb.m_min) - 1e-9, "case {case}");
        assert!((tb.bound(tb.m_min) / c) >= 1.0 - 1e-12);
    }
    assert!(matches!(
        twist_threshold(0.0, 1.0, 1),
        Err(Error::NonPositiveConstant(_))
    ));
}

fn demo_spec() -> BundleSpec {
    // Curvature diag(|z|⁴, 1): semi-positive, degenerate at the origin.
    BundleSpec::parse(1, 2, &["exp(-abs2(z1)^3/9)", "0", "0", "exp(-abs2(z1))"]).unwrap()
}

#[test]
fn cutoff_recertifies_semi_positive_bundle() {
    let spec = demo_spec();
    let pts = SampleGrid::uniform(spec.domain(), 9).points();
    let (s_pts, rest): (Vec<_>, Vec<_>) = pts.iter().cloned().partition(|p| p[0].norm() < 0.3);
    assert_eq!(s_pts.len(), 5);
    let budget = SearchBudget::default();
    let before = certify_points::<f64>(&spec, &pts, &budget).unwrap();
    assert!(before.global_c.abs() < 1e-12);
    let c = certify_points::<f64>(&spec, &rest, &budget).unwrap().global_c;
    assert!((c - 0.015625).abs() < 1e-9);
    let phi = Expression::parse("abs2(z1) - abs2(z1)^2", 1).unwrap();
    let plan = build_cutoff(&spec, &phi, &s_pts, &pts, c).unwrap();
    assert!((plan.observed_negativity - 7.0).abs() < 1e-9);
    assert!((plan.c_tilde_1 - (1.0 - 4.0 * 0.0625)).abs() < 1e-9);
    let out = perturb_metric(&spec, &plan, &budget).unwrap();
    assert!(out.report.global_c > 0.0);
    assert!(out.worst_slack >= -1e-6);
}

#[test]
fn cutoff_rejects_flat_potential() {
    let spec = demo_spec();
    let pts = SampleGrid::uniform(spec.domain(), 3).points();
    let phi = Expression::parse("0", 1).unwrap();
    assert!(matches!(
        build_cutoff(&spec, &phi, &pts[4..5], &pts, 0.1),
        Err(Error::NotStrictlyPsh { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kronecker_form_is_hermitian(seed in 0u64..5000, m in 1u32..4) {
        let mut g = rng(seed);
        let t = random_hermitian_tensor(&mut g, 2, 2, 1.0);
        let h = random_hpd(&mut g, 2, 0.5);
        let u = unit(random_point(&mut g, 2, 1.0));
        let f = tensor_power_form(&t, &h, m, &u).unwrap();
        prop_assert!(f.hermitian_defect() < 1e-12);
        prop_assert_eq!(f.rows(), 2usize.pow(m));
    }
}
