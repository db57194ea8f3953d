//! Holomorphic sectional curvature of a tangent-type metric, its infimum,
//! and the κ/2 bound on the uniform RC-positivity constant.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{to_scalar, BundleSpec, SampleGrid};
use crate::curvature::{chern_curvature_at, CurvatureTensor};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, orthogonal_complement, unitary_frame, CMatrix};
use crate::positivity::{uniform_rc_certificate_at, Witnessed};
use crate::scalar::{czero, Real, C};
use crate::sphere::{halton_sphere, maximize, SearchBudget};

/// Symmetry tolerance for `∂_i g_{kl̄} = ∂_k g_{il̄}`.
pub const KAHLER_TOL: f64 = 1e-8;
/// Slack for the κ/2 bound and the sampled inequality.
pub const HSC_BOUND_TOL: f64 = 1e-6;
/// Number of sampled directions `W` in the default inequality check.
pub const DEFAULT_W_SAMPLES: usize = 1000;

fn require_tangent(spec: &BundleSpec) -> Result<()> {
    if spec.r() != spec.n() {
        return Err(Error::DimensionMismatch {
            what: "tangent-type bundle rank".into(),
            expected: spec.n(),
            found: spec.r(),
        });
    }
    Ok(())
}

fn quartic<T: Real>(r: &CurvatureTensor<T>, u: &[C<T>]) -> T {
    r.eval(u, u).re
}

/// `R(U,Ū,U,Ū) / |U|⁴_g`.
pub fn hsc_at<T: Real>(spec: &BundleSpec, p: &[C<T>], u: &[C<T>]) -> Result<T> {
    require_tangent(spec)?;
    if u.len() != spec.n() {
        return Err(Error::DimensionMismatch {
            what: "tangent direction".into(),
            expected: spec.n(),
            found: u.len(),
        });
    }
    let g = spec.metric_at(p)?;
    let r = chern_curvature_at(spec, p)?;
    hsc_from(&r, &g, u)
}

fn hsc_from<T: Real>(r: &CurvatureTensor<T>, g: &CMatrix<T>, u: &[C<T>]) -> Result<T> {
    let norm2 = g.form(u).re;
    if !(norm2 > T::epsilon() * T::epsilon()) {
        return Err(Error::ZeroDirection);
    }
    Ok(quartic(r, u) / (norm2 * norm2))
}

/// Extremum of the quartic `R(a,ā,a,ā)` over `g`-unit vectors; `sign = 1`
/// finds the maximum, `sign = -1` the minimum (returned with its true sign).
fn quartic_extremum<T: Real>(
    r: &CurvatureTensor<T>,
    g: &CMatrix<T>,
    sign: T,
    budget: &SearchBudget,
) -> Result<Witnessed<T>> {
    let frame = unitary_frame(g)?;
    let t = r.in_frames(&frame, &frame);
    let n = t.n();
    let f = |a: &[C<T>]| {
        let q = t.form_in_base_direction(a);
        let pv = t.form_in_fiber_direction(a);
        let val = q.form(a).re;
        let grad: Vec<C<T>> = (0..n)
            .map(|m| {
                let mut s = czero();
                for i in 0..n {
                    s += a[i] * (pv[(i, m)] + q[(i, m)]);
                }
                s.scale(T::lit(2.0) * sign)
            })
            .collect();
        (sign * val, grad)
    };
    let best = maximize(n, f, budget);
    Ok(Witnessed {
        value: sign * best.value,
        witness: frame.mul_vec(&best.x),
        converged: best.converged,
    })
}

/// `κ_q = min_{|U|_g=1} HSC(U)` and a minimizing `g`-unit direction.
pub fn min_hsc_at<T: Real>(spec: &BundleSpec, p: &[C<T>], budget: &SearchBudget) -> Result<Witnessed<T>> {
    require_tangent(spec)?;
    let g = spec.metric_at(p)?;
    let r = chern_curvature_at(spec, p)?;
    quartic_extremum(&r, &g, -T::one(), budget)
}

/// `max_{|U|_g=1} HSC(U)`.
pub fn max_hsc_at<T: Real>(spec: &BundleSpec, p: &[C<T>], budget: &SearchBudget) -> Result<Witnessed<T>> {
    require_tangent(spec)?;
    let g = spec.metric_at(p)?;
    let r = chern_curvature_at(spec, p)?;
    quartic_extremum(&r, &g, T::one(), budget)
}

/// `min_W 2R(e,ē,W,W̄) − (1+|⟨W,e⟩_g|²) R(e,ē,e,ē)` over the given
/// directions, each normalized in `g` first. `e` is normalized too.
pub fn hsc_minimizer_margin_at<T: Real>(
    spec: &BundleSpec,
    p: &[C<T>],
    e: &[C<T>],
    w_samples: &[Vec<C<T>>],
) -> Result<T> {
    require_tangent(spec)?;
    let g = spec.metric_at(p)?;
    let r = chern_curvature_at(spec, p)?;
    minimizer_margin(&r, &g, e, w_samples)
}

fn g_normalized<T: Real>(g: &CMatrix<T>, v: &[C<T>]) -> Result<Vec<C<T>>> {
    let n2 = g.form(v).re;
    if !(n2 > T::epsilon() * T::epsilon()) {
        return Err(Error::ZeroDirection);
    }
    let s = n2.sqrt();
    Ok(v.iter().map(|z| z / s).collect())
}

fn minimizer_margin<T: Real>(r: &CurvatureTensor<T>, g: &CMatrix<T>, e: &[C<T>], w_samples: &[Vec<C<T>>]) -> Result<T> {
    let e = g_normalized(g, e)?;
    let ree = quartic(r, &e);
    let ge = g.mul_vec(&e.iter().map(|z| z.conj()).collect::<Vec<_>>());
    let mut margin = T::infinity();
    for w in w_samples {
        let w = g_normalized(g, w)?;
        let pairing: C<T> = w.iter().zip(&ge).map(|(a, b)| a * b).fold(czero(), |s, x| s + x);
        let m = T::lit(2.0) * r.eval(&e, &w).re - (T::one() + pairing.norm_sqr()) * ree;
        margin = margin.min(m);
    }
    Ok(margin)
}

/// Coordinates of `v` in the unitary frame `P`: `P⁻¹ = P^H g^T`.
fn frame_coords<T: Real>(frame: &CMatrix<T>, g: &CMatrix<T>, v: &[C<T>]) -> Vec<C<T>> {
    frame.adjoint().mul_vec(&g.transpose().mul_vec(v))
}

/// Default directions: `count` low-discrepancy `g`-unit vectors, `e`, and a
/// `g`-orthonormal completion of `e`.
pub fn default_w_samples<T: Real>(g: &CMatrix<T>, e: &[C<T>], count: usize) -> Result<Vec<Vec<C<T>>>> {
    let n = g.rows();
    let frame = unitary_frame(g)?;
    let mut out: Vec<Vec<C<T>>> = halton_sphere::<T>(n, count).iter().map(|a| frame.mul_vec(a)).collect();
    out.push(e.to_vec());
    // Completion: orthonormal complement of e's frame coordinates.
    let a_e = frame_coords(&frame, g, e);
    let nrm = crate::scalar::vec_norm(&a_e);
    if !(nrm > T::epsilon()) {
        return Err(Error::ZeroDirection);
    }
    let a_e: Vec<C<T>> = a_e.iter().map(|z| z / nrm).collect();
    let comp = orthogonal_complement(n, &[a_e]);
    for k in 0..comp.cols() {
        out.push(frame.mul_vec(&comp.column(k)));
    }
    Ok(out)
}

/// Whether `∂_i g_{kl̄} = ∂_k g_{il̄}` at `p`, with the largest defect.
pub fn kahler_defect_at<T: Real>(spec: &BundleSpec, p: &[C<T>]) -> Result<T> {
    require_tangent(spec)?;
    let jets = spec.metric_jets(p)?;
    let n = spec.n();
    let mut d = T::zero();
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                d = d.max((jets[k * n + l].dz[i] - jets[i * n + l].dz[k]).norm());
            }
        }
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HscPoint<T> {
    pub index: usize,
    pub point: Vec<C<T>>,
    pub kappa_q: T,
    pub e_star: Vec<C<T>>,
    pub hsc_max: T,
    pub c_uniform: T,
    pub u_star: Vec<C<T>>,
    /// `λ_min(Q_{e*})`, the value of the uniform certificate at `u = e*`.
    pub c_at_e_star: T,
    pub minimizer_margin: T,
    pub kahler: bool,
    pub kahler_defect: T,
    /// `c_uniform ≥ κ_q/2 − tol`; `None` unless Kähler with `κ_q ≥ 0`.
    pub half_kappa_bound: Option<bool>,
    /// `max_u λ_min(−Q_u) ≥ −hsc_max/2 − tol`; `None` unless Kähler with
    /// `hsc_max < 0`.
    pub negative_bound: Option<bool>,
    pub unconverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HscReport<T> {
    pub kind: &'static str,
    pub points: Vec<HscPoint<T>>,
    pub kappa: T,
    pub hsc_max: T,
    pub global_c: T,
    pub kahler: bool,
    /// Every asserted bound held.
    pub bounds_hold: bool,
    pub unconverged_points: usize,
}

fn hsc_point<T: Real>(spec: &BundleSpec, index: usize, p: Vec<C<T>>, budget: &SearchBudget) -> Result<HscPoint<T>> {
    let g = spec.metric_at(&p)?;
    let r = chern_curvature_at(spec, &p)?;
    let lo = quartic_extremum(&r, &g, -T::one(), budget)?;
    let hi = quartic_extremum(&r, &g, T::one(), budget)?;
    let up = uniform_rc_certificate_at(&r, &g, &g, budget)?;
    let neg = uniform_rc_certificate_at(&r.scale(-T::one()), &g, &g, budget)?;
    let fr = unitary_frame(&g)?;
    let q_e = r
        .in_frames(&fr, &fr)
        .form_in_base_direction(&frame_coords(&fr, &g, &lo.witness));
    let c_at_e_star = hermitian_eigen(&q_e)?.min();
    let samples = default_w_samples(&g, &lo.witness, DEFAULT_W_SAMPLES)?;
    let margin = minimizer_margin(&r, &g, &lo.witness, &samples)?;
    let defect = kahler_defect_at(spec, &p)?;
    let scale = spec
        .metric_jets(&p)?
        .iter()
        .flat_map(|j| j.dz.iter().map(|z| z.norm()))
        .fold(T::one(), T::max);
    let kahler = defect <= T::tol(KAHLER_TOL) * scale;
    let tol = T::lit(HSC_BOUND_TOL);
    let half = T::lit(0.5);
    Ok(HscPoint {
        index,
        point: p,
        kappa_q: lo.value,
        e_star: lo.witness,
        hsc_max: hi.value,
        c_uniform: up.value,
        u_star: up.witness,
        c_at_e_star,
        minimizer_margin: margin,
        kahler,
        kahler_defect: defect,
        half_kappa_bound: (kahler && lo.value >= -tol).then(|| up.value >= lo.value * half - tol),
        negative_bound: (kahler && hi.value < T::zero()).then(|| neg.value >= -hi.value * half - tol),
        unconverged: !(lo.converged && hi.converged && up.converged && neg.converged),
    })
}

/// Per-point κ_q, the uniform constant with `ω = h = g`, the sampled
/// inequality margin and the κ/2 bounds, over a grid.
pub fn hsc_uniform_bound_report<T: Real>(
    spec: &BundleSpec,
    grid: &SampleGrid,
    budget: &SearchBudget,
) -> Result<HscReport<T>> {
    require_tangent(spec)?;
    let pts = grid.checked_points(spec.domain())?;
    hsc_report_points(spec, &pts, budget)
}

pub fn hsc_report_points<T: Real>(
    spec: &BundleSpec,
    pts: &[Vec<Complex64>],
    budget: &SearchBudget,
) -> Result<HscReport<T>> {
    require_tangent(spec)?;
    if pts.is_empty() {
        return Err(Error::Invalid("no grid points to certify".into()));
    }
    let points = pts
        .par_iter()
        .enumerate()
        .map(|(idx, p)| hsc_point(spec, idx, to_scalar(p), budget).map_err(|e| e.at_point(idx)))
        .collect::<Result<Vec<_>>>()?;
    let kahler = points.iter().all(|p| p.kahler);
    let bounds_hold = points.iter().all(|p| {
        p.half_kappa_bound.unwrap_or(true)
            && p.negative_bound.unwrap_or(true)
            && (!(p.kahler && p.kappa_q >= -T::lit(HSC_BOUND_TOL)) || p.minimizer_margin >= -T::lit(HSC_BOUND_TOL))
    });
    Ok(HscReport {
        kind: crate::positivity::CERTIFICATE_KIND,
        kappa: points.iter().fold(T::infinity(), |m, p| m.min(p.kappa_q)),
        hsc_max: points.iter().fold(T::neg_infinity(), |m, p| m.max(p.hsc_max)),
        global_c: points.iter().fold(T::infinity(), |m, p| m.min(p.c_uniform)),
        unconverged_points: points.iter().filter(|p| p.unconverged).count(),
        kahler,
        bounds_hold,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(a: f64, b: f64) -> Complex64 {
        Complex64::new(a, b)
    }

    fn product_fs(a: f64, b: f64) -> BundleSpec {
        // Factor curvature at the origin is `a` (resp. `b`).
        let e1 = format!("(1+{}*abs2(z1))^(-2)", a / 2.0);
        let e2 = format!("(1+{}*abs2(z2))^(-2)", b / 2.0);
        BundleSpec::parse(2, 2, &[&e1, "0", "0", &e2]).unwrap()
    }

    #[test]
    fn one_dimensional_values() {
        let fs = BundleSpec::parse(1, 1, &["(1+abs2(z1))^(-2)"]).unwrap();
        let v = hsc_at(&fs, &[z(0.0, 0.0)], &[z(0.7, 0.2)]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let disk = BundleSpec::parse(1, 1, &["(1-abs2(z1))^(-2)"]).unwrap();
        let v = hsc_at(&disk, &[z(0.3, -0.1)], &[z(1.0, 0.0)]).unwrap();
        assert!((v + 2.0).abs() < 1e-10);
        assert!(matches!(
            hsc_at(&disk, &[z(0.0, 0.0)], &[z(0.0, 0.0)]),
            Err(Error::ZeroDirection)
        ));
    }

    #[test]
    fn product_minimum_mixes_factors() {
        let spec = product_fs(2.0, 4.0);
        let w = min_hsc_at::<f64>(&spec, &[z(0.0, 0.0), z(0.0, 0.0)], &SearchBudget::default()).unwrap();
        assert!((w.value - 4.0 / 3.0).abs() < 1e-8);
        let t = w.witness[0].norm_sqr();
        assert!((t - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn inequality_and_half_kappa_on_product() {
        let spec = product_fs(2.0, 2.0);
        let p = [z(0.0, 0.0), z(0.0, 0.0)];
        let e = min_hsc_at::<f64>(&spec, &p, &SearchBudget::default()).unwrap().witness;
        let g = spec.metric_at(&p).unwrap();
        let ws = default_w_samples(&g, &e, 1000).unwrap();
        assert_eq!(ws.len(), 1002);
        let m = hsc_minimizer_margin_at(&spec, &p, &e, &ws).unwrap();
        assert!(m >= -1e-6, "margin {m}");
        assert!(m.abs() < 1e-6);
        let grid = SampleGrid::uniform(spec.domain(), 2);
        let rep = hsc_uniform_bound_report::<f64>(&spec, &grid, &SearchBudget::default()).unwrap();
        assert!(rep.kahler);
        assert!(rep.bounds_hold);
    }

    #[test]
    fn non_kahler_is_flagged() {
        let spec = BundleSpec::parse(2, 2, &["1", "z2", "conj(z2)", "2"]).unwrap();
        let d = kahler_defect_at::<f64>(&spec, &[z(0.0, 0.0), z(0.0, 0.0)]).unwrap();
        assert!(d > 0.5);
        let prod = product_fs(2.0, 2.0);
        assert!(kahler_defect_at::<f64>(&prod, &[z(0.2, 0.0), z(0.0, 0.1)]).unwrap() < 1e-12);
    }
}
