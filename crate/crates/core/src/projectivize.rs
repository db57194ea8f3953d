//! Affine charts of projectivized bundles, tautological line bundles and
//! Hermitian metrics induced by pseudoconvex Finsler metrics.
//!
//! A chart with pivot `α₀` parametrizes lines `[w]` of `E` by
//! `w = e_{α₀} + Σ_{j≠α₀} ζ_j e_j`; its coordinates are `(z_1..z_n, ζ_1..ζ_{r-1})`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{to_scalar, BundleSpec, CoordBox, SampleGrid};
use crate::error::{Error, Result};
use crate::expr::{parse_with_fiber, EvalError, EvalErrorKind, Expression, Node};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::positivity::{certify_grid, PositivityReport};
use crate::scalar::{c, Real, C};
use crate::sphere::{halton_sphere, SearchBudget};

/// Which projectivization a chart is read in. Coordinates are the same in
/// both cases (lines through `w ∈ E`); the label records the space the
/// construction lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProjSpace {
    /// `P(E)`, carrying the tautological line `O_{E*}(-1) ⊂ π*E`.
    #[serde(rename = "P(E)")]
    Lines,
    /// `P(E*)`, over which a Finsler metric induces a metric on `π*E`.
    #[serde(rename = "P(E*)")]
    Hyperplanes,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjChart {
    pub n: usize,
    pub r: usize,
    pub pivot: usize,
    pub space: ProjSpace,
    /// Box used for every fiber coordinate `ζ_j`.
    pub fiber_box: CoordBox,
}

impl ProjChart {
    pub fn new(n: usize, r: usize, pivot: usize, space: ProjSpace) -> Result<Self> {
        if pivot >= r {
            return Err(Error::Invalid(format!("pivot {pivot} out of range for rank {r}")));
        }
        Ok(Self {
            n,
            r,
            pivot,
            space,
            fiber_box: CoordBox::centered(1.0),
        })
    }

    pub fn with_fiber_box(mut self, b: CoordBox) -> Self {
        self.fiber_box = b;
        self
    }

    pub fn dim(&self) -> usize {
        self.n + self.r - 1
    }

    /// Chart variable index of fiber component `j ≠ pivot`.
    fn fiber_var(&self, j: usize) -> usize {
        self.n + if j < self.pivot { j } else { j - 1 }
    }

    /// `w(ζ)` as expression nodes on the chart.
    pub fn w_nodes(&self) -> Vec<Node> {
        (0..self.r)
            .map(|j| {
                if j == self.pivot {
                    Node::real(1.0)
                } else {
                    Node::Var(self.fiber_var(j))
                }
            })
            .collect()
    }

    /// `w(ζ)` at a chart point.
    pub fn w_at<T: Real>(&self, p: &[C<T>]) -> Vec<C<T>> {
        (0..self.r)
            .map(|j| {
                if j == self.pivot {
                    C::new(T::one(), T::zero())
                } else {
                    p[self.fiber_var(j)]
                }
            })
            .collect()
    }

    /// Domain of the chart: the base boxes followed by `fiber_box` for each `ζ`.
    pub fn domain(&self, base: &[CoordBox]) -> Vec<CoordBox> {
        let mut d = base.to_vec();
        d.extend(std::iter::repeat(self.fiber_box).take(self.r - 1));
        d
    }

    /// The same point in the chart `other`, if it lies there.
    pub fn transition<T: Real>(&self, other: &ProjChart, p: &[C<T>]) -> Option<Vec<C<T>>> {
        let w = self.w_at(p);
        let lead = w[other.pivot];
        if lead.norm() <= T::epsilon() {
            return None;
        }
        let mut q = p[..self.n].to_vec();
        for (j, wj) in w.iter().enumerate() {
            if j != other.pivot {
                q.push(wj / lead);
            }
        }
        Some(q)
    }

    /// `J[c][d] = ∂q_c/∂p_d` for `q = self.transition(other, p)`.
    pub fn transition_jacobian<T: Real>(&self, other: &ProjChart, p: &[C<T>]) -> Option<CMatrix<T>> {
        let w = self.w_at(p);
        let wb = w[other.pivot];
        if wb.norm() <= T::epsilon() {
            return None;
        }
        let d = self.dim();
        let mut jac = CMatrix::zeros(d, d);
        for i in 0..self.n {
            jac[(i, i)] = C::new(T::one(), T::zero());
        }
        let wb2 = wb * wb;
        for j in (0..self.r).filter(|&j| j != other.pivot) {
            for k in (0..self.r).filter(|&k| k != self.pivot) {
                let mut num = C::new(T::zero(), T::zero());
                if j == k {
                    num = num + wb;
                }
                if k == other.pivot {
                    num = num - w[j];
                }
                jac[(other.fiber_var(j), self.fiber_var(k))] = num / wb2;
            }
        }
        Some(jac)
    }
}

/// Largest deviation of `J^T M_other conj(J)` from `M_self` at `p`, relative
/// to `max(1, |M_self|)`, and whether the positive-eigenvalue counts agree.
pub fn chart_consistency_at(
    l_self: &Expression,
    chart: &ProjChart,
    l_other: &Expression,
    other: &ProjChart,
    p: &[Complex64],
    tol: f64,
) -> Result<Option<(f64, bool)>> {
    let (Some(q), Some(j)) = (chart.transition(other, p), chart.transition_jacobian(other, p)) else {
        return Ok(None);
    };
    let m0 = taut_curvature_at::<f64>(l_self, p)?;
    let m1 = taut_curvature_at::<f64>(l_other, &q)?;
    let pulled = j.transpose().matmul(&m1).matmul(&j.conj());
    let dev = pulled.sub(&m0).max_abs() / m0.max_abs().max(1.0);
    let same = q_positivity_index(&m0, tol)? == q_positivity_index(&m1, tol)?;
    Ok(Some((dev, same)))
}

/// `L(z, ζ) = Σ h_{αβ̄}(z) w^α conj(w^β)`, the metric of the tautological
/// line through `w`.
pub fn taut_line_metric(spec: &BundleSpec, chart: &ProjChart) -> Result<Expression> {
    if chart.n != spec.n() || chart.r != spec.r() {
        return Err(Error::DimensionMismatch {
            what: "chart and bundle".into(),
            expected: spec.n() * spec.r(),
            found: chart.n * chart.r,
        });
    }
    let w = chart.w_nodes();
    let mut acc = Node::real(0.0);
    for a in 0..spec.r() {
        for b in 0..spec.r() {
            let term = Node::mul(
                Node::mul(spec.h(a, b).root().clone(), w[a].clone()),
                Node::conj(w[b].clone()),
            );
            acc = Node::add(acc, term);
        }
    }
    let l = Expression::new(acc, chart.dim())?;
    let domain = chart.domain(spec.domain());
    let probe: Vec<Complex64> = domain.iter().map(CoordBox::center).collect();
    let v = l.eval_value(&probe)?;
    if !(v.re > 0.0) || v.im.abs() > 1e-10 * v.re.abs().max(1.0) {
        return Err(Error::Invalid(format!(
            "tautological metric is not positive at the chart center (value {v})"
        )));
    }
    Ok(l)
}

/// `-∂∂̄ log L` at `p`.
pub fn taut_curvature_at<T: Real>(l: &Expression, p: &[C<T>]) -> Result<CMatrix<T>> {
    let j = l.eval_jet(p)?;
    if !(j.value.re > T::zero()) {
        return Err(Error::Eval(EvalError {
            kind: EvalErrorKind::LogNonPositive,
            subexpr: l.to_string(),
        }));
    }
    let v = j.value;
    let m = j.dim();
    Ok(CMatrix::from_fn(m, m, |a, b| -(j.hess[(a, b)] / v - j.dz[a] * j.dzbar[b] / (v * v))).symmetrized())
}

/// Number of eigenvalues above `tol`.
pub fn q_positivity_index<T: Real>(m: &CMatrix<T>, tol: T) -> Result<usize> {
    Ok(hermitian_eigen(m)?.values.iter().filter(|&&x| x > tol).count())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineRcReport {
    pub positive: bool,
    /// Grid index with the smallest top eigenvalue.
    pub worst_point: usize,
    pub worst_lambda_max: f64,
    pub lambda_max: Vec<f64>,
    pub positive_counts: Vec<usize>,
}

/// Checks that `-∂∂̄ log L` has a positive eigenvalue (above `tol`) at every
/// point.
pub fn line_rc_positive_on_grid(l: &Expression, points: &[Vec<Complex64>], tol: f64) -> Result<LineRcReport> {
    if points.is_empty() {
        return Err(Error::Invalid("sample grid is empty".into()));
    }
    let per: Vec<(f64, usize)> = points
        .par_iter()
        .enumerate()
        .map(|(idx, p)| {
            let run = || -> Result<(f64, usize)> {
                let m = taut_curvature_at::<f64>(l, p)?;
                let e = hermitian_eigen(&m)?;
                Ok((e.max(), e.values.iter().filter(|&&x| x > tol).count()))
            };
            run().map_err(|e| e.at_point(idx))
        })
        .collect::<Result<_>>()?;
    let (worst_point, worst) =
        per.iter().enumerate().fold(
            (0, f64::INFINITY),
            |(wi, wv), (i, (v, _))| if *v < wv { (i, *v) } else { (wi, wv) },
        );
    Ok(LineRcReport {
        positive: per.iter().all(|(v, _)| *v > tol),
        worst_point,
        worst_lambda_max: worst,
        lambda_max: per.iter().map(|x| x.0).collect(),
        positive_counts: per.iter().map(|x| x.1).collect(),
    })
}

/// Pseudoconvex complex Finsler metric `F(z, w)` on a rank-`r` bundle over an
/// `n`-dimensional chart. Fiber coordinates are variables `n..n+r`.
#[derive(Clone, Debug, PartialEq)]
pub struct FinslerSpec {
    n: usize,
    r: usize,
    f: Expression,
    domain: Vec<CoordBox>,
}

/// Relative tolerance for homogeneity and the Euler identity.
pub const FINSLER_HOMOGENEITY_TOL: f64 = 1e-9;

impl FinslerSpec {
    pub fn new(n: usize, r: usize, f: Expression) -> Result<Self> {
        if f.dim() != n + r {
            return Err(Error::DimensionMismatch {
                what: "Finsler expression".into(),
                expected: n + r,
                found: f.dim(),
            });
        }
        Ok(Self {
            n,
            r,
            f,
            domain: vec![CoordBox::centered(1.0); n],
        })
    }

    /// Parses `F` over `z1..zn, w1..wr`.
    pub fn parse(n: usize, r: usize, src: &str) -> Result<Self> {
        Self::new(n, r, parse_with_fiber(src, n, r)?)
    }

    pub fn with_domain(mut self, domain: Vec<CoordBox>) -> Result<Self> {
        if domain.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "domain".into(),
                expected: self.n,
                found: domain.len(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn f(&self) -> &Expression {
        &self.f
    }

    pub fn domain(&self) -> &[CoordBox] {
        &self.domain
    }

    /// Sample fiber vectors: basis vectors and Halton directions, at radii
    /// 0.1, 1 and 10.
    fn fiber_samples(&self) -> Vec<Vec<Complex64>> {
        let mut dirs: Vec<Vec<Complex64>> = (0..self.r)
            .map(|k| (0..self.r).map(|j| c(if j == k { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        dirs.extend(halton_sphere::<f64>(self.r, 12));
        let mut out = Vec::new();
        for radius in [0.1, 1.0, 10.0] {
            for d in &dirs {
                out.push(d.iter().map(|z| z * radius).collect());
            }
        }
        out
    }

    fn base_samples(&self) -> Vec<Vec<Complex64>> {
        let mut pts = vec![self.domain.iter().map(CoordBox::center).collect::<Vec<_>>()];
        pts.extend(SampleGrid::uniform(&self.domain, 2).points());
        pts
    }

    /// Checks homogeneity, positivity, the Euler identity and positive
    /// definiteness of the fiber Hessian at sample points.
    pub fn validate(&self) -> Result<()> {
        let scalars = [c(0.3, 0.4), c(2.0, -1.0), c(0.0, -1.7)];
        let mut sample = 0;
        for z in self.base_samples() {
            for w in self.fiber_samples() {
                let fail = |reason: String| Error::Finsler { sample, reason };
                let mut p = z.clone();
                p.extend(w.iter().copied());
                let jet = self.f.eval_jet(&p).map_err(|e| fail(e.to_string()))?;
                let f0 = jet.value;
                if !(f0.re > 0.0) || f0.im.abs() > 1e-10 * f0.re.abs().max(1e-300) {
                    return Err(fail(format!("F = {f0} is not positive")));
                }
                for lam in scalars {
                    let mut q = z.clone();
                    q.extend(w.iter().map(|x| x * lam));
                    let fl = self.f.eval_value(&q).map_err(|e| fail(e.to_string()))?;
                    let want = f0 * lam.norm_sqr();
                    if (fl - want).norm() > FINSLER_HOMOGENEITY_TOL * want.norm() {
                        return Err(fail(format!("not homogeneous of weight (1,1) under λ = {lam}")));
                    }
                }
                let euler: Complex64 = (0..self.r).map(|a| w[a] * jet.dz[self.n + a]).sum();
                if (euler - f0).norm() > FINSLER_HOMOGENEITY_TOL * f0.norm() {
                    return Err(fail("Euler identity fails".into()));
                }
                let hw = CMatrix::from_fn(self.r, self.r, |a, b| jet.hess[(self.n + a, self.n + b)]);
                let lmin = hermitian_eigen(&hw.symmetrized())
                    .map_err(|e| fail(e.to_string()))?
                    .min();
                if !(lmin > 0.0) {
                    return Err(fail(format!(
                        "fiber Hessian is not positive definite (smallest eigenvalue {lmin:e})"
                    )));
                }
                sample += 1;
            }
        }
        Ok(())
    }
}

fn chart_images(n: usize, chart: &ProjChart) -> Vec<Node> {
    let mut images: Vec<Node> = (0..n).map(Node::Var).collect();
    images.extend(chart.w_nodes());
    images
}

/// Metric `h_{αβ̄} = ∂²F/∂w^α∂w̄^β` on `π*E` over the chart, as a bundle spec
/// of rank `r` on the `(n + r − 1)`-dimensional chart.
pub fn finsler_induced_metric(fs: &FinslerSpec, chart: &ProjChart) -> Result<BundleSpec> {
    if chart.n != fs.n || chart.r != fs.r {
        return Err(Error::Invalid("chart does not match the Finsler bundle".into()));
    }
    fs.validate()?;
    let images = chart_images(fs.n, chart);
    let mut entries = Vec::with_capacity(fs.r * fs.r);
    for a in 0..fs.r {
        for b in 0..fs.r {
            let d = fs.f.wirtinger(fs.n + a, false).wirtinger(fs.n + b, true);
            entries.push(d.substitute(&images, chart.dim())?);
        }
    }
    BundleSpec::new(chart.dim(), fs.r, entries)?.with_domain(chart.domain(fs.domain()))
}

/// `F` along the chart section, the metric of the tautological line.
pub fn finsler_taut_metric(fs: &FinslerSpec, chart: &ProjChart) -> Result<Expression> {
    Ok(fs.f.substitute(&chart_images(fs.n, chart), chart.dim())?)
}

/// Certifies the induced Hermitian bundle over the chart.
pub fn finsler_rc_certificate(
    fs: &FinslerSpec,
    chart: &ProjChart,
    grid: &SampleGrid,
    budget: &SearchBudget,
) -> Result<PositivityReport<f64>> {
    let spec = finsler_induced_metric(fs, chart)?;
    certify_grid(&spec, grid, budget)
}

/// Points of a grid on the chart, as `f64` complex coordinates.
pub fn chart_points(chart: &ProjChart, base: &[CoordBox], per_axis: usize) -> Vec<Vec<Complex64>> {
    SampleGrid::uniform(&chart.domain(base), per_axis).points()
}

#[doc(hidden)]
pub fn to_chart_scalar<T: Real>(p: &[Complex64]) -> Vec<C<T>> {
    to_scalar(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(a: f64, b: f64) -> Complex64 {
        Complex64::new(a, b)
    }

    #[test]
    fn rank_one_has_no_fiber_coordinates() {
        let spec = BundleSpec::parse(1, 1, &["(1+abs2(z1))^(-1)"]).unwrap();
        let chart = ProjChart::new(1, 1, 0, ProjSpace::Lines).unwrap();
        let l = taut_line_metric(&spec, &chart).unwrap();
        assert_eq!(l.dim(), 1);
        let m = taut_curvature_at(&l, &[z(0.0, 0.0)]).unwrap();
        assert!((m[(0, 0)].re - 1.0).abs() < 1e-14);
        assert_eq!(q_positivity_index(&m, 1e-8).unwrap(), 1);
    }

    #[test]
    fn flat_rank_two() {
        let spec = BundleSpec::parse(1, 2, &["1", "0", "0", "1"]).unwrap();
        let chart = ProjChart::new(1, 2, 0, ProjSpace::Lines).unwrap();
        let l = taut_line_metric(&spec, &chart).unwrap();
        let v = l.eval_value(&[z(0.3, 0.0), z(0.5, 0.5)]).unwrap();
        assert!((v.re - 1.5).abs() < 1e-14);
        let m = taut_curvature_at(&l, &[z(0.0, 0.0), z(0.0, 0.0)]).unwrap();
        assert!(m[(0, 0)].norm() < 1e-14);
        assert!((m[(1, 1)].re + 1.0).abs() < 1e-14);
        assert_eq!(q_positivity_index(&m, 1e-8).unwrap(), 0);
    }

    #[test]
    fn exponential_weight_shifts_base_entry() {
        let spec = BundleSpec::parse(1, 2, &["1", "0", "0", "1"]).unwrap();
        let chart = ProjChart::new(1, 2, 1, ProjSpace::Lines).unwrap();
        let l = taut_line_metric(&spec, &chart).unwrap();
        let shifted = Expression::new(
            Node::mul(
                l.root().clone(),
                Expression::parse("exp(abs2(z1))", 2).unwrap().into_root(),
            ),
            2,
        )
        .unwrap();
        let p = [z(0.2, 0.1), z(-0.3, 0.4)];
        let a = taut_curvature_at(&l, &p).unwrap();
        let b = taut_curvature_at(&shifted, &p).unwrap();
        assert!((b[(0, 0)] - a[(0, 0)] + z(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn chart_transition_round_trip() {
        let c0 = ProjChart::new(1, 2, 0, ProjSpace::Lines).unwrap();
        let c1 = ProjChart::new(1, 2, 1, ProjSpace::Lines).unwrap();
        let p = [z(0.2, 0.0), z(0.5, -0.5)];
        let q = c0.transition(&c1, &p).unwrap();
        assert!((q[1] - z(1.0, 1.0)).norm() < 1e-14);
        let back = c1.transition(&c0, &q).unwrap();
        assert!((back[1] - p[1]).norm() < 1e-14);
        assert!(c0.transition(&c1, &[z(0.0, 0.0), z(0.0, 0.0)]).is_none());
    }

    #[test]
    fn hermitian_finsler_reproduces_metric() {
        let fs = FinslerSpec::parse(
            1,
            2,
            "(1+abs2(z1))*abs2(w1) + abs2(w2) + 0.5*z1*w1*conj(w2) + 0.5*conj(z1)*w2*conj(w1)",
        )
        .unwrap();
        let chart = ProjChart::new(1, 2, 0, ProjSpace::Hyperplanes).unwrap();
        let induced = finsler_induced_metric(&fs, &chart).unwrap();
        let p = [z(0.3, -0.2), z(0.7, 0.1)];
        let h = induced.metric_at(&p).unwrap();
        let zz = p[0];
        let want = CMatrix::from_rows(&[
            vec![z(1.0 + zz.norm_sqr(), 0.0), zz * 0.5],
            vec![zz.conj() * 0.5, z(1.0, 0.0)],
        ]);
        assert!(h.sub(&want).max_abs() < 1e-12);
    }

    #[test]
    fn rejects_non_pseudoconvex() {
        let fs = FinslerSpec::parse(1, 2, "(abs2(w1) - abs2(w2))^2 / (abs2(w1) + abs2(w2))").unwrap();
        assert!(matches!(fs.validate(), Err(Error::Finsler { .. })));
        let fs = FinslerSpec::parse(1, 2, "abs2(w1)^2 + abs2(w2)").unwrap();
        assert!(matches!(fs.validate(), Err(Error::Finsler { .. })));
    }
}
