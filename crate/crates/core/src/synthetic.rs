//! Seeded random inputs: positive-definite polynomial metrics, curvature-like
//! tensors and Hermitian matrices. Used by tests and acceptance runs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::{BundleSpec, CoordBox};
use crate::curvature::CurvatureTensor;
use crate::error::Result;
use crate::linalg::CMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coef(rng: &mut impl Rng, scale: f64) -> Complex64 {
    Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

fn fmt_c(z: Complex64) -> String {
    format!("({:.6}+({:.6})*i)", z.re, z.im)
}

/// Holomorphic polynomial of degree ≤ 2 in `z1..zn`, as DSL text.
fn random_poly(rng: &mut impl Rng, n: usize) -> String {
    let mut terms = vec![fmt_c(coef(rng, 0.5))];
    for i in 1..=n {
        terms.push(format!("{}*z{i}", fmt_c(coef(rng, 0.5))));
        for j in i..=n {
            if rng.random_bool(0.5) {
                terms.push(format!("{}*z{i}*z{j}", fmt_c(coef(rng, 0.3))));
            }
        }
    }
    terms.join(" + ")
}

/// `h = d(z)·I + Σ_k p_k p_k^H` with `d = 1 + Σ c_i |z_i|²`, sometimes times
/// `exp(c|z_1|²)` or plus `log(2 + |z_1|²)`, and `p_k` holomorphic
/// polynomials. Positive definite everywhere; domain `[-0.8, 0.8]²`.
pub fn random_polynomial_spec(rng: &mut impl Rng, n: usize, r: usize) -> Result<BundleSpec> {
    let mut diag = String::from("1");
    for i in 1..=n {
        diag.push_str(&format!(" + {:.6}*abs2(z{i})", rng.random_range(0.1..1.0)));
    }
    match rng.random_range(0..3) {
        0 => diag = format!("({diag})*exp({:.6}*abs2(z1))", rng.random_range(-0.5..0.5)),
        1 => diag = format!("{diag} + log(2 + abs2(z1))"),
        _ => {}
    }
    let k = rng.random_range(1..=2);
    let polys: Vec<Vec<String>> = (0..k).map(|_| (0..r).map(|_| random_poly(rng, n)).collect()).collect();
    let mut entries = Vec::with_capacity(r * r);
    for a in 0..r {
        for b in 0..r {
            let mut parts: Vec<String> = Vec::new();
            if a == b {
                parts.push(format!("({diag})"));
            }
            for p in &polys {
                parts.push(format!("({})*conj({})", p[a], p[b]));
            }
            entries.push(parts.join(" + "));
        }
    }
    let refs: Vec<&str> = entries.iter().map(String::as_str).collect();
    BundleSpec::parse(n, r, &refs)?.with_domain(vec![CoordBox::centered(0.8); n])
}

/// A point with every coordinate in `[-a, a]²`.
pub fn random_point(rng: &mut impl Rng, n: usize, a: f64) -> Vec<Complex64> {
    (0..n).map(|_| coef(rng, a)).collect()
}

/// Tensor with `R[i][j][α][β] = conj(R[j][i][β][α])`, entries of size
/// about `scale`.
pub fn random_hermitian_tensor(rng: &mut impl Rng, n: usize, r: usize, scale: f64) -> CurvatureTensor<f64> {
    let raw = CurvatureTensor::from_fn(n, r, |_, _, _, _| coef(rng, scale));
    CurvatureTensor::from_fn(n, r, |i, j, a, b| {
        (raw.get(i, j, a, b) + raw.get(j, i, b, a).conj()) * 0.5
    })
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize, scale: f64) -> CMatrix<f64> {
    let raw = CMatrix::from_fn(d, d, |_, _| coef(rng, scale));
    raw.add(&raw.adjoint()).scale(Complex64::new(0.5, 0.0))
}

/// `A A^H + shift·I`.
pub fn random_hpd(rng: &mut impl Rng, d: usize, shift: f64) -> CMatrix<f64> {
    let a = CMatrix::from_fn(d, d, |_, _| coef(rng, 1.0));
    a.matmul(&a.adjoint())
        .add(&CMatrix::identity(d).scale(Complex64::new(shift, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::SampleGrid;

    #[test]
    fn specs_are_positive_and_reproducible() {
        for seed in 0..10 {
            let s1 = random_polynomial_spec(&mut rng(seed), 2, 2).unwrap();
            let s2 = random_polynomial_spec(&mut rng(seed), 2, 2).unwrap();
            assert_eq!(s1, s2);
            for p in SampleGrid::uniform(s1.domain(), 3).points() {
                s1.metric_at::<f64>(&p).unwrap();
            }
        }
    }

    #[test]
    fn tensors_are_hermitian() {
        let t = random_hermitian_tensor(&mut rng(3), 2, 3, 1.0);
        assert!(t.hermitian_defect() < 1e-15);
        let m = random_hermitian(&mut rng(4), 4, 1.0);
        assert!(m.hermitian_defect() < 1e-15);
    }
}
