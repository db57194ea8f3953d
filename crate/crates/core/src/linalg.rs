//! Small dense complex matrices: Hermitian eigensolver, Cholesky, frames.
//!
//! Hermitian forms throughout the crate follow the index convention of the
//! metric: a matrix `M` acts on a vector `v` as `Σ v_a M[a][b] conj(v_b)`.
//! Eigenvalues of that form are the eigenvalues of `M` itself, with
//! eigenvectors conjugated.

use std::ops::{Index, IndexMut};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{czero, re, Real, C};

/// Cholesky pivots below this are treated as a singular metric.
pub const CHOLESKY_PIVOT_FLOOR: f64 = 1e-12;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = re(T::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C<T>>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (k, v) in values.iter().enumerate() {
            m[(k, k)] = re(*v);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == czero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).fold(czero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m + z.norm_sqr()).sqrt()
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).fold(czero(), |acc, k| acc + self[(k, k)])
    }

    /// Largest `|M[i][j] - conj(M[j][i])|`.
    pub fn hermitian_defect(&self) -> T {
        let mut d = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// `(M + M^H) / 2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()).scale(half)
        })
    }

    /// Evaluates the Hermitian form `Σ v_a M[a][b] conj(v_b)`.
    pub fn form(&self, v: &[C<T>]) -> C<T> {
        let mut acc = czero();
        for a in 0..self.rows {
            if v[a] == czero() {
                continue;
            }
            let mut row = czero();
            for b in 0..self.cols {
                row += self[(a, b)] * v[b].conj();
            }
            acc += v[a] * row;
        }
        acc
    }

    /// Pulls a form back along the frame `P`: `P^T M conj(P)`.
    pub fn congruence(&self, frame: &Self) -> Self {
        frame.transpose().matmul(self).matmul(&frame.conj())
    }

    /// Lower-triangular Cholesky factor `L` with `M = L L^H`.
    pub fn cholesky(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                what: "cholesky".into(),
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        let floor = T::lit(CHOLESKY_PIVOT_FLOOR);
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d >= floor) {
                return Err(Error::SingularMetric {
                    pivot: d.to_f64_lossy(),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = re(djj);
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }

    /// Inverse of a Hermitian positive-definite matrix via Cholesky.
    pub fn inverse_hpd(&self) -> Result<Self> {
        let l = self.cholesky()?;
        let linv = lower_triangular_inverse(&l);
        Ok(linv.adjoint().matmul(&linv))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.cols + j]
    }
}

fn lower_triangular_inverse<T: Real>(l: &CMatrix<T>) -> CMatrix<T> {
    let n = l.rows();
    let mut inv = CMatrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { re(T::one()) } else { czero() };
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv
}

/// Frame `P` in which the metric becomes the identity: `P^T M conj(P) = I`.
///
/// Built from the Cholesky factor `M = L L^H` as `P = (L^T)^{-1}`, so the
/// columns follow the pivot order. A coordinate vector `a` in this frame
/// corresponds to the vector `P a` in the original one.
pub fn unitary_frame<T: Real>(metric: &CMatrix<T>) -> Result<CMatrix<T>> {
    let l = metric.cholesky()?;
    Ok(lower_triangular_inverse(&l).transpose())
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        *self.values.last().expect("nonempty spectrum")
    }

    pub fn vector(&self, k: usize) -> Vec<C<T>> {
        self.vectors.column(k)
    }
}

/// Hermitian input tolerance before symmetrization.
pub const HERMITIAN_INPUT_TOL: f64 = 1e-9;

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian
/// matrix by cyclic complex Jacobi rotations.
///
/// The input is symmetrized first; a defect above `1e-9 * max(1, |M|)` is
/// rejected.
pub fn hermitian_eigen<T: Real>(m: &CMatrix<T>) -> Result<HermitianEigen<T>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            what: "hermitian_eigen".into(),
            expected: m.rows(),
            found: m.cols(),
        });
    }
    let scale = T::one().max(m.max_abs());
    let defect = m.hermitian_defect();
    if defect > T::tol(HERMITIAN_INPUT_TOL) * scale {
        return Err(Error::NonHermitian {
            deviation: defect.to_f64_lossy(),
        });
    }
    Ok(jacobi_eigen(m.symmetrized()))
}

fn jacobi_eigen<T: Real>(mut a: CMatrix<T>) -> HermitianEigen<T> {
    let n = a.rows();
    let mut v = CMatrix::identity(n);
    if n == 0 {
        return HermitianEigen {
            values: vec![],
            vectors: v,
        };
    }
    let eps = T::epsilon();
    let norm = a.frobenius();
    let threshold = eps * norm * T::lit(0.5);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= threshold || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g == T::zero() {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Skip rotations that would not change the diagonal in working precision.
                if g <= eps * T::lit(0.25) * (app.abs() + aqq.abs()) && g < threshold {
                    a[(p, q)] = czero();
                    a[(q, p)] = czero();
                    continue;
                }
                let phase = apq / g;
                let theta = (aqq - app) / (g + g);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let cth = T::one() / (t * t + T::one()).sqrt();
                let sth = t * cth;
                // G = [[c, s], [-s conj(e), c conj(e)]] on the (p, q) plane; A <- G^H A G.
                let g_pp = re(cth);
                let g_pq = re(sth);
                let g_qp = -phase.conj() * sth;
                let g_qq = phase.conj() * cth;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = czero();
                a[(q, p)] = czero();
                a[(p, p)] = re(a[(p, p)].re);
                a[(q, q)] = re(a[(q, q)].re);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(i, i)]
            .re
            .partial_cmp(&a[(j, j)].re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Orthonormal basis (as columns) of the orthogonal complement of `span`.
///
/// `span` vectors must be orthonormal. Candidates are the standard basis
/// vectors, kept in index order after Gram-Schmidt.
pub fn orthogonal_complement<T: Real>(dim: usize, span: &[Vec<C<T>>]) -> CMatrix<T> {
    let mut basis: Vec<Vec<C<T>>> = span.to_vec();
    let mut extra = Vec::new();
    for k in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = vec![czero(); dim];
        v[k] = re(T::one());
        for b in &basis {
            let proj = crate::scalar::inner(b, &v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let nrm = crate::scalar::vec_norm(&v);
        if nrm > T::lit(1e-8) {
            for vi in v.iter_mut() {
                *vi = *vi / nrm;
            }
            basis.push(v.clone());
            extra.push(v);
        }
    }
    CMatrix::from_fn(dim, extra.len(), |i, j| extra[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    fn residual(m: &CMatrix<f64>, e: &HermitianEigen<f64>) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..m.rows() {
            let v = e.vector(k);
            let mv = m.mul_vec(&v);
            let r: f64 = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b * e.values[k]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        worst
    }

    #[test]
    fn identity_spectrum() {
        let e = hermitian_eigen(&CMatrix::<f64>::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted() {
        let e = hermitian_eigen(&CMatrix::diagonal(&[2.0, -1.0])).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0]);
    }

    #[test]
    fn complex_two_by_two() {
        // characteristic polynomial λ² − 4λ + 3
        let m = CMatrix::from_rows(&[vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(2.0, 0.0)]]);
        let e: HermitianEigen<f64> = hermitian_eigen(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        assert!(residual(&m, &e) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]);
        assert!(matches!(hermitian_eigen(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn cholesky_inverse_and_frame() {
        let m = CMatrix::from_rows(&[vec![c(2.0, 0.0), c(0.5, 0.3)], vec![c(0.5, -0.3), c(1.0, 0.0)]]);
        let inv = m.inverse_hpd().unwrap();
        let id = m.matmul(&inv);
        assert!(id.sub(&CMatrix::identity(2)).max_abs() < 1e-14);
        let p = unitary_frame(&m).unwrap();
        assert!(m.congruence(&p).sub(&CMatrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn singular_metric_rejected() {
        let m = CMatrix::<f64>::diagonal(&[1.0, 1e-14]);
        assert!(matches!(m.cholesky(), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn complement_is_orthonormal() {
        let s = 0.5f64.sqrt();
        let span = vec![vec![c(s, 0.0), c(0.0, s), c(0.0, 0.0)]];
        let b = orthogonal_complement(3, &span);
        assert_eq!(b.cols(), 2);
        let gram = b.adjoint().matmul(&b);
        assert!(gram.sub(&CMatrix::identity(2)).max_abs() < 1e-14);
        for j in 0..2 {
            assert!(crate::scalar::inner(&span[0], &b.column(j)).norm() < 1e-14);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn hermitian(n: usize) -> impl Strategy<Value = CMatrix<f64>> {
            proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n * n).prop_map(move |raw| {
                let x = CMatrix::from_fn(n, n, |i, j| c(raw[i * n + j].0, raw[i * n + j].1));
                x.symmetrized()
            })
        }

        proptest! {
            #[test]
            fn eigen_residual_small(m in (1usize..7).prop_flat_map(hermitian)) {
                let e = hermitian_eigen(&m).unwrap();
                let scale = m.frobenius().max(1.0);
                prop_assert!(residual(&m, &e) <= 1e-10 * scale);
                for w in e.values.windows(2) {
                    prop_assert!(w[0] <= w[1]);
                }
                let gram = e.vectors.adjoint().matmul(&e.vectors);
                prop_assert!(gram.sub(&CMatrix::identity(m.rows())).max_abs() < 1e-12);
            }
        }
    }
}
