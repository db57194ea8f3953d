//! Finite-difference Wirtinger jets, used as an independent oracle for the
//! forward-mode jets.
//!
//! Each complex coordinate `z_k = x_k + i y_k` contributes two real axes.
//! First derivatives use the fourth-order central stencil, pure second
//! derivatives the matching five-point stencil, and mixed second derivatives
//! the tensor product of two first-derivative stencils.

use crate::error::Result;
use crate::expr::MixedJet;
use crate::linalg::CMatrix;
use crate::scalar::{c, czero, Real, C};

const OFFSETS: [i32; 4] = [-2, -1, 1, 2];
const FIRST: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
const SECOND: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

fn shifted<T: Real>(p: &[C<T>], moves: &[(usize, i32)], h: T) -> Vec<C<T>> {
    let mut q = p.to_vec();
    for &(axis, k) in moves {
        let d = h * T::lit(k as f64);
        let z = &mut q[axis / 2];
        if axis % 2 == 0 {
            z.re += d;
        } else {
            z.im += d;
        }
    }
    q
}

/// Jets of every component of a vector-valued function at `p` by central
/// differences with step `h`. Reaches at most `2h` along each real axis.
pub fn fd_jets<T: Real, F>(f: F, p: &[C<T>], h: T) -> Result<Vec<MixedJet<T>>>
where
    F: Fn(&[C<T>]) -> Result<Vec<C<T>>>,
{
    let m = p.len();
    let axes = 2 * m;
    let f0 = f(p)?;
    let k = f0.len();
    let twelve = T::lit(12.0);

    // d1[a][c]: first derivative of component c along real axis a.
    let mut d1 = vec![vec![czero::<T>(); k]; axes];
    for (a, row) in d1.iter_mut().enumerate() {
        for (&o, &w) in OFFSETS.iter().zip(&FIRST) {
            let v = f(&shifted(p, &[(a, o)], h))?;
            for (acc, x) in row.iter_mut().zip(v) {
                *acc += x * T::lit(w);
            }
        }
        for acc in row.iter_mut() {
            *acc = *acc / (twelve * h);
        }
    }

    // d2[a][b][c]: second derivative along axes a, b.
    let mut d2 = vec![vec![vec![czero::<T>(); k]; axes]; axes];
    for a in 0..axes {
        let mut diag = vec![czero::<T>(); k];
        for (o, &w) in (-2..=2).zip(&SECOND) {
            let v = if o == 0 {
                f0.clone()
            } else {
                f(&shifted(p, &[(a, o)], h))?
            };
            for (acc, x) in diag.iter_mut().zip(v) {
                *acc += x * T::lit(w);
            }
        }
        for acc in diag.iter_mut() {
            *acc = *acc / (twelve * h * h);
        }
        d2[a][a] = diag;
        for b in (a + 1)..axes {
            let mut mixed = vec![czero::<T>(); k];
            for (&oa, &wa) in OFFSETS.iter().zip(&FIRST) {
                for (&ob, &wb) in OFFSETS.iter().zip(&FIRST) {
                    let v = f(&shifted(p, &[(a, oa), (b, ob)], h))?;
                    for (acc, x) in mixed.iter_mut().zip(v) {
                        *acc += x * T::lit(wa * wb);
                    }
                }
            }
            for acc in mixed.iter_mut() {
                *acc = *acc / (twelve * twelve * h * h);
            }
            d2[a][b] = mixed.clone();
            d2[b][a] = mixed;
        }
    }

    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let i_unit = c(T::zero(), T::one());
    Ok((0..k)
        .map(|comp| {
            let dx = |j: usize| d1[2 * j][comp];
            let dy = |j: usize| d1[2 * j + 1][comp];
            let dz = (0..m).map(|j| (dx(j) - i_unit * dy(j)).scale(half)).collect();
            let dzbar = (0..m).map(|j| (dx(j) + i_unit * dy(j)).scale(half)).collect();
            let hess = CMatrix::from_fn(m, m, |a, b| {
                let xx = d2[2 * a][2 * b][comp];
                let yy = d2[2 * a + 1][2 * b + 1][comp];
                let xy = d2[2 * a][2 * b + 1][comp];
                let yx = d2[2 * a + 1][2 * b][comp];
                (xx + yy + i_unit * (xy - yx)).scale(quarter)
            });
            MixedJet {
                value: f0[comp],
                dz,
                dzbar,
                hess,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;
    use crate::expr::parse;

    #[test]
    fn agrees_with_forward_jets() {
        let e = parse("exp(z1+conj(z2))*abs2(z1) + log(2+abs2(z2))", 2).unwrap();
        let p = [Complex64::new(0.2, -0.1), Complex64::new(0.4, 0.3)];
        for step in [1e-3, 1e-4] {
            let fd = fd_jets(|q| Ok(vec![e.eval_value(q)?]), &p, step).unwrap();
            let ad = e.eval_jet(&p).unwrap();
            let fd = &fd[0];
            let scale = 1.0 + ad.hess.max_abs();
            for k in 0..2 {
                assert!((fd.dz[k] - ad.dz[k]).norm() < 1e-6 * scale);
                assert!((fd.dzbar[k] - ad.dzbar[k]).norm() < 1e-6 * scale);
            }
            assert!(fd.hess.sub(&ad.hess).max_abs() < 1e-6 * scale);
        }
    }
}
