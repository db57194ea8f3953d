//! Dense sphere enumeration, independent of the multi-start optimizer.
#![allow(dead_code)]

use num_complex::Complex64;
use rcpl_core::{CMatrix, CurvatureTensor};

/// Eigenvalues `(min, max)` of a 1×1 or 2×2 Hermitian matrix in closed form.
pub fn eig_extremes(m: &CMatrix<f64>) -> (f64, f64) {
    match m.rows() {
        1 => (m[(0, 0)].re, m[(0, 0)].re),
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(0, 1)];
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            (mid - rad, mid + rad)
        }
        k => panic!("closed-form eigenvalues only for size ≤ 2, got {k}"),
    }
}

fn point(dim: usize, theta: f64, phi: f64) -> Vec<Complex64> {
    match dim {
        1 => vec![Complex64::new(1.0, 0.0)],
        2 => vec![
            Complex64::new(theta.cos(), 0.0),
            Complex64::from_polar(theta.sin(), phi),
        ],
        k => panic!("enumeration only for dimension ≤ 2, got {k}"),
    }
}

/// Extremum of `f` over unit vectors of `ℂ^dim` (`dim ≤ 2`, phase
/// quotiented), by a 200×400 grid followed by local zooms.
pub fn sphere_extreme(dim: usize, f: impl Fn(&[Complex64]) -> f64, maximize: bool) -> f64 {
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    if dim == 1 {
        return f(&point(1, 0.0, 0.0));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let tau = std::f64::consts::TAU;
    let (mut bt, mut bp, mut best) = (0.0, 0.0, f(&point(2, 0.0, 0.0)));
    let (nt, np) = (200, 400);
    for a in 0..=nt {
        for b in 0..np {
            let t = half_pi * a as f64 / nt as f64;
            let p = tau * b as f64 / np as f64;
            let v = f(&point(2, t, p));
            if better(v, best) {
                (bt, bp, best) = (t, p, v);
            }
        }
    }
    let (mut wt, mut wp) = (half_pi / nt as f64, tau / np as f64);
    for _ in 0..6 {
        let (ct, cp) = (bt, bp);
        for a in -20..=20 {
            for b in -20..=20 {
                let t = (ct + wt * a as f64 / 20.0).clamp(0.0, half_pi);
                let p = cp + wp * b as f64 / 20.0;
                let v = f(&point(2, t, p));
                if better(v, best) {
                    (bt, bp, best) = (t, p, v);
                }
            }
        }
        wt *= 0.2;
        wp *= 0.2;
    }
    best
}

/// `max_u λ_min(Q_u)` for a tensor already in unitary frames.
pub fn brute_uniform(t: &CurvatureTensor<f64>) -> f64 {
    sphere_extreme(t.n(), |u| eig_extremes(&t.form_in_base_direction(u)).0, true)
}

/// `min_v λ_max(P_v)`.
pub fn brute_rc(t: &CurvatureTensor<f64>) -> f64 {
    sphere_extreme(t.r(), |v| eig_extremes(&t.form_in_fiber_direction(v)).1, false)
}

/// `min_u λ_min(Q_u)`.
pub fn brute_griffiths(t: &CurvatureTensor<f64>) -> f64 {
    sphere_extreme(t.n(), |u| eig_extremes(&t.form_in_base_direction(u)).0, false)
}
