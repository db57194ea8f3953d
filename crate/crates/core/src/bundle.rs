//! Hermitian holomorphic bundles declared on a coordinate chart, and sample
//! grids over the chart.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expression, MixedJet};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::scalar::{from_c64, Real, C};

/// Hermitian-symmetry tolerance for evaluated metrics, relative to `max(1, |h|)`.
pub const METRIC_HERMITIAN_TOL: f64 = 1e-10;

/// Box `re ∈ [re[0], re[1]]`, `im ∈ [im[0], im[1]]` for one complex coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoordBox {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

impl CoordBox {
    pub fn new(re: [f64; 2], im: [f64; 2]) -> Self {
        Self { re, im }
    }

    /// Square `[-a, a] × [-a, a]`.
    pub fn centered(a: f64) -> Self {
        Self::new([-a, a], [-a, a])
    }

    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re[0] - slack
            && z.re <= self.re[1] + slack
            && z.im >= self.im[0] - slack
            && z.im <= self.im[1] + slack
    }

    /// Distance from `z` to the boundary, negative outside.
    pub fn margin(&self, z: Complex64) -> f64 {
        (z.re - self.re[0])
            .min(self.re[1] - z.re)
            .min(z.im - self.im[0])
            .min(self.im[1] - z.im)
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re[0] + self.re[1]), 0.5 * (self.im[0] + self.im[1]))
    }
}

/// A rank-`r` bundle over an `n`-dimensional chart with metric entries
/// `h[α][β] = h_{αβ̄}` and an optional base metric `omega[i][j] = g_{ij̄}`
/// (identity when absent).
#[derive(Clone, Debug, PartialEq)]
pub struct BundleSpec {
    n: usize,
    r: usize,
    h: Vec<Expression>,
    omega: Option<Vec<Expression>>,
    domain: Vec<CoordBox>,
    sections: Vec<Vec<Expression>>,
}

fn check_entries(what: &str, entries: &[Expression], side: usize, n: usize) -> Result<()> {
    if entries.len() != side * side {
        return Err(Error::DimensionMismatch {
            what: what.into(),
            expected: side * side,
            found: entries.len(),
        });
    }
    for e in entries {
        if e.dim() != n {
            return Err(Error::DimensionMismatch {
                what: format!("{what} entry chart dimension"),
                expected: n,
                found: e.dim(),
            });
        }
    }
    Ok(())
}

impl BundleSpec {
    /// Metric entries in row-major order. The domain defaults to the unit
    /// square `[-1, 1]²` in every coordinate.
    pub fn new(n: usize, r: usize, h: Vec<Expression>) -> Result<Self> {
        if r == 0 {
            return Err(Error::Invalid("bundle rank must be positive".into()));
        }
        check_entries("metric", &h, r, n)?;
        Ok(Self {
            n,
            r,
            h,
            omega: None,
            domain: vec![CoordBox::centered(1.0); n],
            sections: Vec::new(),
        })
    }

    /// Parses metric entries given as strings, row-major.
    pub fn parse(n: usize, r: usize, h: &[&str]) -> Result<Self> {
        let h = h
            .iter()
            .map(|s| Expression::parse(s, n))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(n, r, h)
    }

    pub fn with_omega(mut self, omega: Vec<Expression>) -> Result<Self> {
        check_entries("base metric", &omega, self.n, self.n)?;
        self.omega = Some(omega);
        Ok(self)
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

    /// Adds a section, one expression per fiber component.
    pub fn with_section(mut self, section: Vec<Expression>) -> Result<Self> {
        check_entries_vec(&section, self.r, self.n)?;
        self.sections.push(section);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn h(&self, a: usize, b: usize) -> &Expression {
        &self.h[a * self.r + b]
    }

    pub fn h_entries(&self) -> &[Expression] {
        &self.h
    }

    pub fn omega_entries(&self) -> Option<&[Expression]> {
        self.omega.as_deref()
    }

    pub fn domain(&self) -> &[CoordBox] {
        &self.domain
    }

    pub fn sections(&self) -> &[Vec<Expression>] {
        &self.sections
    }

    /// Same bundle with every metric entry replaced by `map(entry)`.
    pub fn map_metric(&self, map: impl Fn(&Expression) -> Expression) -> Result<Self> {
        let h = self.h.iter().map(map).collect();
        let mut out = Self::new(self.n, self.r, h)?;
        out.omega = self.omega.clone();
        out.domain = self.domain.clone();
        out.sections = self.sections.clone();
        Ok(out)
    }

    pub fn check_point<T: Real>(&self, p: &[C<T>]) -> Result<()> {
        if p.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "chart point".into(),
                expected: self.n,
                found: p.len(),
            });
        }
        for (k, (z, b)) in p.iter().zip(&self.domain).enumerate() {
            let z = Complex64::new(z.re.to_f64_lossy(), z.im.to_f64_lossy());
            if !b.contains(z, 1e-9) {
                return Err(Error::OutOfDomain(format!(
                    "coordinate z{} = {z} outside [{}, {}] × [{}, {}]i",
                    k + 1,
                    b.re[0],
                    b.re[1],
                    b.im[0],
                    b.im[1]
                )));
            }
        }
        Ok(())
    }

    /// `h(p)`, checked Hermitian and positive definite.
    pub fn metric_at<T: Real>(&self, p: &[C<T>]) -> Result<CMatrix<T>> {
        self.check_point(p)?;
        let mut m = CMatrix::zeros(self.r, self.r);
        for a in 0..self.r {
            for b in 0..self.r {
                m[(a, b)] = self.h(a, b).eval_value(p)?;
            }
        }
        checked_hpd("metric", m)
    }

    /// `ω(p)`, identity when no base metric is declared.
    pub fn omega_at<T: Real>(&self, p: &[C<T>]) -> Result<CMatrix<T>> {
        match &self.omega {
            None => Ok(CMatrix::identity(self.n)),
            Some(entries) => {
                self.check_point(p)?;
                let mut m = CMatrix::zeros(self.n, self.n);
                for i in 0..self.n {
                    for j in 0..self.n {
                        m[(i, j)] = entries[i * self.n + j].eval_value(p)?;
                    }
                }
                checked_hpd("base metric", m)
            }
        }
    }

    /// Jets of the metric entries, row-major.
    pub fn metric_jets<T: Real>(&self, p: &[C<T>]) -> Result<Vec<MixedJet<T>>> {
        self.check_point(p)?;
        Ok(self
            .h
            .iter()
            .map(|e| e.eval_jet(p))
            .collect::<std::result::Result<Vec<_>, _>>()?)
    }
}

fn check_entries_vec(entries: &[Expression], len: usize, n: usize) -> Result<()> {
    if entries.len() != len {
        return Err(Error::DimensionMismatch {
            what: "section".into(),
            expected: len,
            found: entries.len(),
        });
    }
    for e in entries {
        if e.dim() != n {
            return Err(Error::DimensionMismatch {
                what: "section entry chart dimension".into(),
                expected: n,
                found: e.dim(),
            });
        }
    }
    Ok(())
}

/// Verifies Hermitian symmetry and positive definiteness, returning the
/// symmetrized matrix.
pub fn checked_hpd<T: Real>(what: &str, m: CMatrix<T>) -> Result<CMatrix<T>> {
    let scale = T::one().max(m.max_abs());
    let defect = m.hermitian_defect();
    if defect > T::tol(METRIC_HERMITIAN_TOL) * scale {
        return Err(Error::NonHermitian {
            deviation: defect.to_f64_lossy(),
        });
    }
    let m = m.symmetrized();
    let eig = hermitian_eigen(&m)?;
    if !(eig.min() > T::zero()) {
        return Err(Error::NotPositiveDefinite {
            what: what.into(),
            min_eigenvalue: eig.min().to_f64_lossy(),
        });
    }
    Ok(m)
}

/// Samples along one real axis: `count` evenly spaced values in `[lo, hi]`,
/// endpoints included; a single sample sits at the midpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![0.5 * (self.lo + self.hi)],
            k => (0..k)
                .map(|j| self.lo + (self.hi - self.lo) * j as f64 / (k - 1) as f64)
                .collect(),
        }
    }
}

/// Finite set of chart points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SampleGrid {
    /// Product grid; one `(re, im)` axis pair per complex coordinate. Points
    /// are ordered with the first axis varying slowest.
    Product(Vec<(Axis, Axis)>),
    Explicit(Vec<Vec<Complex64>>),
}

impl SampleGrid {
    /// `count` samples along every real axis of the domain.
    pub fn uniform(domain: &[CoordBox], count: usize) -> Self {
        SampleGrid::Product(
            domain
                .iter()
                .map(|b| {
                    (
                        Axis {
                            lo: b.re[0],
                            hi: b.re[1],
                            count,
                        },
                        Axis {
                            lo: b.im[0],
                            hi: b.im[1],
                            count,
                        },
                    )
                })
                .collect(),
        )
    }

    pub fn points(&self) -> Vec<Vec<Complex64>> {
        match self {
            SampleGrid::Explicit(pts) => pts.clone(),
            SampleGrid::Product(axes) => {
                let mut out: Vec<Vec<Complex64>> = vec![vec![]];
                for (ra, ia) in axes {
                    let res = ra.values();
                    let ims = ia.values();
                    let mut next = Vec::with_capacity(out.len() * res.len() * ims.len());
                    for prefix in &out {
                        for &x in &res {
                            for &y in &ims {
                                let mut p = prefix.clone();
                                p.push(Complex64::new(x, y));
                                next.push(p);
                            }
                        }
                    }
                    out = next;
                }
                out
            }
        }
    }

    /// All points, checked against the chart dimension and domain.
    pub fn checked_points(&self, domain: &[CoordBox]) -> Result<Vec<Vec<Complex64>>> {
        let pts = self.points();
        if pts.is_empty() {
            return Err(Error::Invalid("sample grid is empty".into()));
        }
        for (idx, p) in pts.iter().enumerate() {
            if p.len() != domain.len() {
                return Err(Error::DimensionMismatch {
                    what: format!("grid point {idx}"),
                    expected: domain.len(),
                    found: p.len(),
                });
            }
            if p.iter().zip(domain).any(|(z, b)| !b.contains(*z, 1e-9)) {
                return Err(Error::OutOfDomain(format!("grid point {idx}")));
            }
        }
        Ok(pts)
    }
}

pub fn to_scalar<T: Real>(p: &[Complex64]) -> Vec<C<T>> {
    p.iter().map(|z| from_c64(*z)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_metric() {
        let spec = BundleSpec::parse(1, 2, &["1", "0", "0", "1"]).unwrap();
        let m = spec.metric_at(&[Complex64::new(0.3, 0.2)]).unwrap();
        assert_eq!(m, CMatrix::identity(2));
    }

    #[test]
    fn exponential_line_metric() {
        let spec = BundleSpec::parse(1, 1, &["exp(abs2(z1))"]).unwrap();
        let m = spec.metric_at(&[Complex64::new(1.0, 0.0)]).unwrap();
        assert!((m[(0, 0)].re - std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn hopf_metric_at_unit_point() {
        let s = "1/(abs2(z1)+abs2(z2))";
        let spec = BundleSpec::parse(2, 2, &[s, "0", "0", s])
            .unwrap()
            .with_domain(vec![CoordBox::new([0.5, 1.5], [-0.5, 0.5]), CoordBox::centered(0.5)])
            .unwrap();
        let m = spec
            .metric_at(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
            .unwrap();
        assert!(m.sub(&CMatrix::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn indefinite_metric_reports_eigenvalue() {
        let spec = BundleSpec::parse(1, 2, &["1", "2", "2", "1"]).unwrap();
        match spec.metric_at(&[Complex64::new(0.0, 0.0)]) {
            Err(Error::NotPositiveDefinite { min_eigenvalue, .. }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_domain() {
        let spec = BundleSpec::parse(1, 1, &["1"]).unwrap();
        assert!(matches!(
            spec.metric_at(&[Complex64::new(2.0, 0.0)]),
            Err(Error::OutOfDomain(_))
        ));
    }

    #[test]
    fn product_grid_order() {
        let g = SampleGrid::uniform(&[CoordBox::centered(1.0)], 3);
        let pts = g.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0][0], Complex64::new(-1.0, -1.0));
        assert_eq!(pts[1][0], Complex64::new(-1.0, 0.0));
        assert_eq!(pts[8][0], Complex64::new(1.0, 1.0));
    }
}
