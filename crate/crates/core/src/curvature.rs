//! Chern curvature of a Hermitian holomorphic bundle at a point.
//!
//! In a holomorphic frame, with `H[α][β] = h_{αβ̄}` and `K = H⁻¹`,
//!
//! ```text
//! R_{ij̄}[α][β] = -∂_i∂̄_j H[α][β] + (∂_i H · K · ∂̄_j H)[α][β]
//! ```
//!
//! so Fubini–Study type metrics have positive curvature.

use serde::Serialize;

use crate::bundle::BundleSpec;
use crate::error::{Error, Result};
use crate::expr::{Expression, MixedJet};
use crate::fd::fd_jets;
use crate::functorial::dual_curvature;
use crate::linalg::CMatrix;
use crate::scalar::{cone, czero, Real, C};

/// Tolerance for the Hermitian symmetry of evaluated curvature tensors.
pub const CURVATURE_SYMMETRY_TOL: f64 = 1e-9;

/// `R[i][j][α][β]` with base indices `i, j < n` and fiber indices `α, β < r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureTensor<T> {
    n: usize,
    r: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CurvatureTensor<T> {
    pub fn zeros(n: usize, r: usize) -> Self {
        Self {
            n,
            r,
            data: vec![czero(); n * n * r * r],
        }
    }

    pub fn from_fn(n: usize, r: usize, mut f: impl FnMut(usize, usize, usize, usize) -> C<T>) -> Self {
        let mut t = Self::zeros(n, r);
        for i in 0..n {
            for j in 0..n {
                for a in 0..r {
                    for b in 0..r {
                        t.data[((i * n + j) * r + a) * r + b] = f(i, j, a, b);
                    }
                }
            }
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> C<T> {
        self.data[((i * self.n + j) * self.r + a) * self.r + b]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, a: usize, b: usize, v: C<T>) {
        let (n, r) = (self.n, self.r);
        self.data[((i * n + j) * r + a) * r + b] = v;
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.n, self.r, |i, j, a, b| {
            self.get(i, j, a, b) - other.get(i, j, a, b)
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            n: self.n,
            r: self.r,
            data: self.data.iter().map(|z| z.scale(s)).collect(),
        }
    }

    /// Largest `|R[i][j][α][β] - conj(R[j][i][β][α])|`.
    pub fn hermitian_defect(&self) -> T {
        let mut d = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                for a in 0..self.r {
                    for b in 0..self.r {
                        d = d.max((self.get(i, j, a, b) - self.get(j, i, b, a).conj()).norm());
                    }
                }
            }
        }
        d
    }

    /// `R(u, ū, v, v̄)`.
    pub fn eval(&self, u: &[C<T>], v: &[C<T>]) -> C<T> {
        self.form_in_base_direction(u).form(v)
    }

    /// `Q_u[α][β] = Σ R[i][j][α][β] u_i conj(u_j)`; then `R(u,ū,v,v̄) = Σ v_α Q_u[α][β] conj(v_β)`.
    pub fn form_in_base_direction(&self, u: &[C<T>]) -> CMatrix<T> {
        assert_eq!(u.len(), self.n, "base direction length");
        let mut q = CMatrix::zeros(self.r, self.r);
        for i in 0..self.n {
            for j in 0..self.n {
                let w = u[i] * u[j].conj();
                if w == czero() {
                    continue;
                }
                for a in 0..self.r {
                    for b in 0..self.r {
                        q[(a, b)] += self.get(i, j, a, b) * w;
                    }
                }
            }
        }
        q
    }

    /// `P_v[i][j] = Σ R[i][j][α][β] v_α conj(v_β)`.
    pub fn form_in_fiber_direction(&self, v: &[C<T>]) -> CMatrix<T> {
        assert_eq!(v.len(), self.r, "fiber direction length");
        let mut p = CMatrix::zeros(self.n, self.n);
        for a in 0..self.r {
            for b in 0..self.r {
                let w = v[a] * v[b].conj();
                if w == czero() {
                    continue;
                }
                for i in 0..self.n {
                    for j in 0..self.n {
                        p[(i, j)] += self.get(i, j, a, b) * w;
                    }
                }
            }
        }
        p
    }

    /// Components in new frames: base vectors are the columns of `base`,
    /// fiber vectors the columns of `fiber`.
    ///
    /// `R'[i'][j'][α'][β'] = Σ base[i][i'] conj(base[j][j']) fiber[α][α'] conj(fiber[β][β']) R[i][j][α][β]`.
    pub fn in_frames(&self, base: &CMatrix<T>, fiber: &CMatrix<T>) -> Self {
        let (n, r) = (self.n, self.r);
        let (n2, r2) = (base.cols(), fiber.cols());
        // Contract one index at a time.
        let mut t1 = vec![czero::<T>(); n2 * n * r * r];
        for ip in 0..n2 {
            for i in 0..n {
                let w = base[(i, ip)];
                if w == czero() {
                    continue;
                }
                for rest in 0..n * r * r {
                    t1[ip * n * r * r + rest] += w * self.data[i * n * r * r + rest];
                }
            }
        }
        let mut t2 = vec![czero::<T>(); n2 * n2 * r * r];
        for ip in 0..n2 {
            for jp in 0..n2 {
                for j in 0..n {
                    let w = base[(j, jp)].conj();
                    if w == czero() {
                        continue;
                    }
                    for rest in 0..r * r {
                        t2[(ip * n2 + jp) * r * r + rest] += w * t1[(ip * n + j) * r * r + rest];
                    }
                }
            }
        }
        let mut t3 = vec![czero::<T>(); n2 * n2 * r2 * r];
        for ij in 0..n2 * n2 {
            for ap in 0..r2 {
                for a in 0..r {
                    let w = fiber[(a, ap)];
                    if w == czero() {
                        continue;
                    }
                    for b in 0..r {
                        t3[(ij * r2 + ap) * r + b] += w * t2[(ij * r + a) * r + b];
                    }
                }
            }
        }
        let mut out = Self::zeros(n2, r2);
        for ij in 0..n2 * n2 {
            for ap in 0..r2 {
                for bp in 0..r2 {
                    let mut s = czero();
                    for b in 0..r {
                        s += fiber[(b, bp)].conj() * t3[(ij * r2 + ap) * r + b];
                    }
                    out.data[(ij * r2 + ap) * r2 + bp] = s;
                }
            }
        }
        out
    }
}

/// Curvature from metric value and derivative data. `dz[i]`, `dzbar[j]`,
/// `hess[i][j]` are the `r×r` matrices `∂_i H`, `∂̄_j H`, `∂_i∂̄_j H`.
fn assemble<T: Real>(
    h: &CMatrix<T>,
    dz: &[CMatrix<T>],
    dzbar: &[CMatrix<T>],
    hess: &[Vec<CMatrix<T>>],
) -> Result<CurvatureTensor<T>> {
    let n = dz.len();
    let r = h.rows();
    let k = h.inverse_hpd()?;
    let mut t = CurvatureTensor::zeros(n, r);
    for i in 0..n {
        let left = dz[i].matmul(&k);
        for j in 0..n {
            let m = left.matmul(&dzbar[j]).sub(&hess[i][j]);
            for a in 0..r {
                for b in 0..r {
                    t.set(i, j, a, b, m[(a, b)]);
                }
            }
        }
    }
    Ok(t)
}

fn assemble_from_jets<T: Real>(jets: &[MixedJet<T>], n: usize, r: usize) -> Result<CurvatureTensor<T>> {
    let h = CMatrix::from_fn(r, r, |a, b| jets[a * r + b].value);
    let dz: Vec<_> = (0..n)
        .map(|i| CMatrix::from_fn(r, r, |a, b| jets[a * r + b].dz[i]))
        .collect();
    let dzbar: Vec<_> = (0..n)
        .map(|j| CMatrix::from_fn(r, r, |a, b| jets[a * r + b].dzbar[j]))
        .collect();
    let hess: Vec<Vec<_>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| CMatrix::from_fn(r, r, |a, b| jets[a * r + b].hess[(i, j)]))
                .collect()
        })
        .collect();
    assemble(&h, &dz, &dzbar, &hess)
}

/// Chern curvature at `p` from exact jets of the metric entries.
pub fn chern_curvature_at<T: Real>(spec: &BundleSpec, p: &[C<T>]) -> Result<CurvatureTensor<T>> {
    spec.metric_at(p)?;
    let jets = spec.metric_jets(p)?;
    let t = assemble_from_jets(&jets, spec.n(), spec.r())?;
    let defect = t.hermitian_defect();
    let scale = T::one().max(t.max_abs());
    if defect > T::tol(CURVATURE_SYMMETRY_TOL) * scale {
        return Err(Error::NonHermitian {
            deviation: defect.to_f64_lossy(),
        });
    }
    Ok(t)
}

/// Same formula with every derivative replaced by central differences of the
/// metric values. `p` must lie at least `2·step` inside the domain.
pub fn curvature_fd_oracle<T: Real>(spec: &BundleSpec, p: &[C<T>], step: T) -> Result<CurvatureTensor<T>> {
    spec.metric_at(p)?;
    let reach = 2.0 * step.to_f64_lossy();
    for (z, b) in p.iter().zip(spec.domain()) {
        let margin = b.margin(num_complex::Complex64::new(z.re.to_f64_lossy(), z.im.to_f64_lossy()));
        if margin < reach {
            return Err(Error::StepTooLarge {
                step: step.to_f64_lossy(),
                margin,
            });
        }
    }
    let jets = fd_jets(
        |q| {
            spec.h_entries()
                .iter()
                .map(|e| e.eval_value(q).map_err(Error::from))
                .collect()
        },
        p,
        step,
    )?;
    assemble_from_jets(&jets, spec.n(), spec.r())
}

/// `Ric_{ij̄} = g^{kℓ̄} R_{ij̄kℓ̄}` for a tangent-type bundle (`r = n`, `g = h`).
pub fn chern_ricci_at<T: Real>(spec: &BundleSpec, p: &[C<T>]) -> Result<CMatrix<T>> {
    if spec.r() != spec.n() {
        return Err(Error::DimensionMismatch {
            what: "Chern-Ricci requires rank equal to chart dimension".into(),
            expected: spec.n(),
            found: spec.r(),
        });
    }
    let t = chern_curvature_at(spec, p)?;
    let kinv = spec.metric_at(p)?.inverse_hpd()?;
    let n = spec.n();
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let mut s = czero();
        for k in 0..n {
            for l in 0..n {
                s += kinv[(l, k)] * t.get(i, j, k, l);
            }
        }
        s
    }))
}

/// `R^{(2)}_{αβ̄} = g^{ij̄} R_{ij̄αβ̄}`. The trace uses `h` itself when the
/// bundle is tangent-type without a declared base metric, and `ω` otherwise.
pub fn second_ricci_at<T: Real>(spec: &BundleSpec, p: &[C<T>]) -> Result<CMatrix<T>> {
    let t = chern_curvature_at(spec, p)?;
    let g = if spec.r() == spec.n() && spec.omega_entries().is_none() {
        spec.metric_at(p)?
    } else {
        spec.omega_at(p)?
    };
    let ginv = g.inverse_hpd()?;
    let (n, r) = (spec.n(), spec.r());
    Ok(CMatrix::from_fn(r, r, |a, b| {
        let mut s = czero();
        for i in 0..n {
            for j in 0..n {
                s += ginv[(j, i)] * t.get(i, j, a, b);
            }
        }
        s
    }))
}

/// Inverse of a matrix of jets by Gauss–Jordan elimination in jet arithmetic.
pub fn jet_matrix_inverse<T: Real>(m: &[MixedJet<T>], r: usize) -> Result<Vec<MixedJet<T>>> {
    let dim = m.first().map_or(0, MixedJet::dim);
    let mut a: Vec<MixedJet<T>> = m.to_vec();
    let mut inv: Vec<MixedJet<T>> = (0..r * r)
        .map(|k| {
            let v = if k / r == k % r { cone() } else { czero() };
            MixedJet::constant(v, dim)
        })
        .collect();
    for col in 0..r {
        let pivot = (col..r)
            .max_by(|&x, &y| {
                a[x * r + col]
                    .value
                    .norm()
                    .partial_cmp(&a[y * r + col].value.norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty pivot range");
        if a[pivot * r + col].value == czero() {
            return Err(Error::SingularMetric { pivot: 0.0 });
        }
        if pivot != col {
            for k in 0..r {
                a.swap(pivot * r + k, col * r + k);
                inv.swap(pivot * r + k, col * r + k);
            }
        }
        let rp = a[col * r + col].recip();
        for k in 0..r {
            a[col * r + k] = a[col * r + k].mul(&rp);
            inv[col * r + k] = inv[col * r + k].mul(&rp);
        }
        for row in 0..r {
            if row == col {
                continue;
            }
            let f = a[row * r + col].clone();
            for k in 0..r {
                a[row * r + k] = a[row * r + k].sub(&f.mul(&a[col * r + k]));
                inv[row * r + k] = inv[row * r + k].sub(&f.mul(&inv[col * r + k]));
            }
        }
    }
    Ok(inv)
}

/// Residual of `∂_i∂̄_j |s|² = ⟨∇_i s, ∇_j s⟩ − R*_{ij̄}(s, s̄)` for a
/// holomorphic section `s` of the dual bundle with the induced metric.
///
/// Sections are written in the dual holomorphic frame; the dual metric is
/// `G = conj(h⁻¹)`. Returns the largest entrywise deviation over `(i, j)`.
pub fn bochner_residual<T: Real>(spec: &BundleSpec, s: &[Expression], p: &[C<T>]) -> Result<T> {
    let (n, r) = (spec.n(), spec.r());
    if s.len() != r {
        return Err(Error::DimensionMismatch {
            what: "section".into(),
            expected: r,
            found: s.len(),
        });
    }
    if let Some(index) = s.iter().position(|e| !e.is_holomorphic()) {
        return Err(Error::NonHolomorphic { index });
    }
    let h = spec.metric_at(p)?;
    let hj = spec.metric_jets(p)?;
    let kj = jet_matrix_inverse(&hj, r)?;
    // G[α][β] = K[β][α]
    let gj: Vec<MixedJet<T>> = (0..r * r).map(|k| kj[(k % r) * r + k / r].clone()).collect();
    let sj: Vec<MixedJet<T>> = s.iter().map(|e| e.eval_jet(p)).collect::<std::result::Result<_, _>>()?;

    let mut norm = MixedJet::constant(czero(), n);
    for a in 0..r {
        for b in 0..r {
            norm = norm.add(&sj[a].mul(&gj[a * r + b]).mul(&sj[b].conj()));
        }
    }

    let g = CMatrix::from_fn(r, r, |a, b| gj[a * r + b].value);
    let ginv = h.transpose();
    let sv: Vec<C<T>> = sj.iter().map(|j| j.value).collect();
    let nabla: Vec<Vec<C<T>>> = (0..n)
        .map(|i| {
            let dg = CMatrix::from_fn(r, r, |a, b| gj[a * r + b].dz[i]);
            let gamma = dg.matmul(&ginv);
            (0..r)
                .map(|c| {
                    let mut v = sj[c].dz[i];
                    for a in 0..r {
                        v += sv[a] * gamma[(a, c)];
                    }
                    v
                })
                .collect()
        })
        .collect();

    let dual = dual_curvature(&chern_curvature_at(spec, p)?, &h)?;
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let lhs = norm.hess[(i, j)];
            let mut inner = czero();
            for c in 0..r {
                for e in 0..r {
                    inner += nabla[i][c] * g[(c, e)] * nabla[j][e].conj();
                }
            }
            let mut curv = czero();
            for a in 0..r {
                for b in 0..r {
                    curv += dual.get(i, j, a, b) * sv[a] * sv[b].conj();
                }
            }
            worst = worst.max((lhs - inner + curv).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;
    use crate::bundle::CoordBox;

    fn z(a: f64, b: f64) -> Complex64 {
        Complex64::new(a, b)
    }

    #[test]
    fn constant_metric_is_flat() {
        let spec = BundleSpec::parse(2, 2, &["2", "i", "-i", "3"]).unwrap();
        let t = chern_curvature_at(&spec, &[z(0.1, 0.2), z(-0.3, 0.0)]).unwrap();
        assert_eq!(t.max_abs(), 0.0);
    }

    #[test]
    fn fubini_study_at_origin() {
        let spec = BundleSpec::parse(1, 1, &["(1+abs2(z1))^(-2)"]).unwrap();
        let t = chern_curvature_at(&spec, &[z(0.0, 0.0)]).unwrap();
        assert!((t.get(0, 0, 0, 0) - z(2.0, 0.0)).norm() < 1e-14);
        let fd = curvature_fd_oracle(&spec, &[z(0.0, 0.0)], 1e-3).unwrap();
        assert!((fd.get(0, 0, 0, 0) - z(2.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn fd_step_must_fit_domain() {
        let spec = BundleSpec::parse(1, 1, &["1"]).unwrap();
        assert!(matches!(
            curvature_fd_oracle(&spec, &[z(0.999, 0.0)], 1e-3),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn ricci_of_fubini_study() {
        let spec = BundleSpec::parse(1, 1, &["(1+abs2(z1))^(-2)"]).unwrap();
        let ric = chern_ricci_at(&spec, &[z(0.0, 0.0)]).unwrap();
        assert!((ric[(0, 0)] - z(2.0, 0.0)).norm() < 1e-14);
        let spec = BundleSpec::parse(1, 2, &["1", "0", "0", "1"]).unwrap();
        assert!(chern_ricci_at(&spec, &[z(0.0, 0.0)]).is_err());
    }

    #[test]
    fn ricci_of_product_is_blockwise() {
        // Fubini–Study on each factor of CP1 × CP1: the Ricci form is the
        // direct sum of the factor values 2/(1+|z_k|²)².
        let spec = BundleSpec::parse(2, 2, &["(1+abs2(z1))^(-2)", "0", "0", "(1+abs2(z2))^(-2)"]).unwrap();
        let p = [z(0.3, -0.2), z(-0.5, 0.4)];
        let ric = chern_ricci_at(&spec, &p).unwrap();
        for k in 0..2 {
            let want = 2.0 / (1.0 + p[k].norm_sqr()).powi(2);
            assert!((ric[(k, k)].re - want).abs() < 1e-12);
        }
        assert!(ric[(0, 1)].norm() < 1e-14);
        let r2 = second_ricci_at(&spec, &p).unwrap();
        assert!(r2.sub(&ric).max_abs() < 1e-12);
    }

    #[test]
    fn bochner_examples() {
        let spec = BundleSpec::parse(1, 1, &["1"]).unwrap();
        let s = vec![Expression::parse("2", 1).unwrap()];
        assert!(bochner_residual(&spec, &s, &[z(0.1, 0.0)]).unwrap() < 1e-14);

        let spec = BundleSpec::parse(1, 1, &["exp(-abs2(z1))"]).unwrap();
        let s = vec![Expression::parse("z1", 1).unwrap()];
        assert!(bochner_residual(&spec, &s, &[z(0.3, 0.0)]).unwrap() < 1e-7);

        let spec = BundleSpec::parse(1, 2, &["exp(-abs2(z1))", "0", "0", "1+abs2(z1)"]).unwrap();
        let s = vec![
            Expression::parse("z1", 1).unwrap(),
            Expression::parse("z1^2", 1).unwrap(),
        ];
        assert!(bochner_residual(&spec, &s, &[z(0.3, -0.4)]).unwrap() < 1e-7);

        let bad = vec![
            Expression::parse("z1", 1).unwrap(),
            Expression::parse("conj(z1)", 1).unwrap(),
        ];
        assert!(matches!(
            bochner_residual(&spec, &bad, &[z(0.3, 0.0)]),
            Err(Error::NonHolomorphic { index: 1 })
        ));
    }

    #[test]
    fn frames_round_trip() {
        let spec = BundleSpec::parse(2, 2, &["2+abs2(z1)", "z1*conj(z2)", "z2*conj(z1)", "1+abs2(z2)"])
            .unwrap()
            .with_domain(vec![CoordBox::centered(1.0); 2])
            .unwrap();
        let p = [z(0.3, 0.1), z(-0.2, 0.5)];
        let t = chern_curvature_at(&spec, &p).unwrap();
        let u = [z(0.4, -0.3), z(1.1, 0.2)];
        let v = [z(-0.7, 0.2), z(0.3, 0.9)];
        // R evaluated on (Pa, Fb) equals the transformed tensor on (a, b)
        let base = CMatrix::from_rows(&[vec![z(1.0, 0.5), z(0.2, 0.0)], vec![z(0.0, -1.0), z(2.0, 0.3)]]);
        let fiber = CMatrix::from_rows(&[vec![z(0.3, 0.0), z(1.0, 1.0)], vec![z(-0.5, 0.2), z(0.7, 0.0)]]);
        let t2 = t.in_frames(&base, &fiber);
        let direct = t.eval(&base.mul_vec(&u), &fiber.mul_vec(&v));
        assert!((direct - t2.eval(&u, &v)).norm() < 1e-12);
        assert!(t.eval(&u, &v).im.abs() < 1e-12);
    }
}
