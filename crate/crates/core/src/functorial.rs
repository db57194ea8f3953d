//! Curvature of induced bundles: duals, tensor powers, symmetric and exterior
//! powers, line-bundle twists, and conformal changes `h ↦ e^{-f} h` with the
//! cutoff construction that turns semi-positivity into positivity.

use num_complex::Complex64;
use serde::Serialize;

use crate::bundle::{to_scalar, BundleSpec, SampleGrid};
use crate::curvature::CurvatureTensor;
use crate::error::{Error, Result};
use crate::expr::{Expression, MixedJet, Node};
use crate::linalg::{hermitian_eigen, unitary_frame, CMatrix};
use crate::positivity::{certify_points, PositivityReport};
use crate::scalar::{czero, re, Real, C};
use crate::sphere::SearchBudget;

/// Largest tensor-power fiber dimension `r^m` accepted.
pub const TENSOR_POWER_LIMIT: usize = 4096;

/// Curvature of the dual bundle with the induced metric, in the dual of the
/// original coordinate frame: `R*_{ij̄} = -conj(K) R_{ij̄}ᵀ conj(K)` with
/// `K = h_p⁻¹`. In an `h`-unitary frame this is `R*[i][j][α][β] = -R[i][j][β][α]`.
pub fn dual_curvature<T: Real>(r: &CurvatureTensor<T>, h_p: &CMatrix<T>) -> Result<CurvatureTensor<T>> {
    let k = h_p.inverse_hpd()?.conj();
    let (n, rank) = (r.n(), r.r());
    let mut out = CurvatureTensor::zeros(n, rank);
    for i in 0..n {
        for j in 0..n {
            let rt = CMatrix::from_fn(rank, rank, |a, b| r.get(i, j, b, a));
            let m = k.matmul(&rt).matmul(&k);
            for a in 0..rank {
                for b in 0..rank {
                    out.set(i, j, a, b, -m[(a, b)]);
                }
            }
        }
    }
    Ok(out)
}

fn power_dim(r: usize, m: u32) -> Result<usize> {
    match r.checked_pow(m) {
        Some(d) if d <= TENSOR_POWER_LIMIT => Ok(d),
        _ => Err(Error::SizeGuard {
            size: r.saturating_pow(m),
            limit: TENSOR_POWER_LIMIT,
        }),
    }
}

/// Kronecker sum `Σ_k I^{⊗(k-1)} ⊗ A ⊗ I^{⊗(m-k)}`.
pub fn kronecker_sum<T: Real>(a: &CMatrix<T>, m: u32) -> Result<CMatrix<T>> {
    let r = a.rows();
    let dim = power_dim(r, m)?;
    let mut out = CMatrix::zeros(dim, dim);
    for k in 0..m {
        let left = CMatrix::identity(r.pow(k));
        let right = CMatrix::identity(r.pow(m - k - 1));
        out = out.add(&left.kron(a).kron(&right));
    }
    Ok(out)
}

/// Form `v ↦ R^{E^{⊗m}}(u, ū, v, v̄)` on `E^{⊗m}` in the tensor frame built
/// from an `h`-unitary frame of `E`.
pub fn tensor_power_form<T: Real>(r: &CurvatureTensor<T>, h_p: &CMatrix<T>, m: u32, u: &[C<T>]) -> Result<CMatrix<T>> {
    if m == 0 {
        return Err(Error::Invalid("tensor power must be at least 1".into()));
    }
    power_dim(r.r(), m)?;
    let q = r.form_in_base_direction(u).congruence(&unitary_frame(h_p)?);
    kronecker_sum(&q, m)
}

/// Full curvature tensor of `E^{⊗m}` in the tensor product of `h`-unitary
/// frames (so the induced metric is the identity).
pub fn tensor_power_curvature<T: Real>(r: &CurvatureTensor<T>, h_p: &CMatrix<T>, m: u32) -> Result<CurvatureTensor<T>> {
    if m == 0 {
        return Err(Error::Invalid("tensor power must be at least 1".into()));
    }
    let dim = power_dim(r.r(), m)?;
    let n = r.n();
    let unit = r.in_frames(&CMatrix::identity(n), &unitary_frame(h_p)?);
    let mut out = CurvatureTensor::zeros(n, dim);
    for i in 0..n {
        for j in 0..n {
            let block = CMatrix::from_fn(r.r(), r.r(), |a, b| unit.get(i, j, a, b));
            let big = kronecker_sum(&block, m)?;
            for a in 0..dim {
                for b in 0..dim {
                    out.set(i, j, a, b, big[(a, b)]);
                }
            }
        }
    }
    Ok(out)
}

/// Certificate inherited by `Sym^k E`: `k·C`.
pub fn sym_power_certificate(c: f64, k: u32) -> f64 {
    k as f64 * c
}

/// Certificate inherited by `Λ^p E`: `p·C`.
pub fn wedge_power_certificate(c: f64, p: u32) -> f64 {
    p as f64 * c
}

fn multi_indices(r: usize, m: u32) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..r).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

fn flat_index(idx: &[usize], r: usize) -> usize {
    idx.iter().fold(0, |acc, &a| acc * r + a)
}

fn sign_of_permutation(p: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

/// Orthonormal basis (as columns) of the symmetric (`antisymmetric` false)
/// or antisymmetric tensors in `(ℂ^r)^{⊗m}`.
fn invariant_basis<T: Real>(r: usize, m: u32, antisymmetric: bool) -> Result<CMatrix<T>> {
    let dim = power_dim(r, m)?;
    let perms = permutations(m as usize);
    let mut cols: Vec<Vec<C<T>>> = Vec::new();
    for idx in multi_indices(r, m) {
        let nondecreasing = idx.windows(2).all(|w| w[0] <= w[1]);
        let strictly = idx.windows(2).all(|w| w[0] < w[1]);
        if (antisymmetric && !strictly) || (!antisymmetric && !nondecreasing) {
            continue;
        }
        let mut v = vec![czero::<T>(); dim];
        for p in &perms {
            let permuted: Vec<usize> = p.iter().map(|&k| idx[k]).collect();
            let s = if antisymmetric { sign_of_permutation(p) } else { 1.0 };
            v[flat_index(&permuted, r)] += re(T::lit(s));
        }
        let norm = crate::scalar::vec_norm(&v);
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    Ok(CMatrix::from_fn(dim, cols.len(), |i, j| cols[j][i]))
}

/// Tensor-power form restricted to `Sym^k E`, in an orthonormal basis of
/// symmetric tensors over an `h`-unitary frame.
pub fn sym_power_form<T: Real>(r: &CurvatureTensor<T>, h_p: &CMatrix<T>, k: u32, u: &[C<T>]) -> Result<CMatrix<T>> {
    let full = tensor_power_form(r, h_p, k, u)?;
    Ok(full.congruence(&invariant_basis(r.r(), k, false)?))
}

/// Tensor-power form restricted to `Λ^p E`.
pub fn wedge_power_form<T: Real>(r: &CurvatureTensor<T>, h_p: &CMatrix<T>, p: u32, u: &[C<T>]) -> Result<CMatrix<T>> {
    let full = tensor_power_form(r, h_p, p, u)?;
    Ok(full.congruence(&invariant_basis(r.r(), p, true)?))
}

/// Twist threshold for `E^{⊗m} ⊗ L^{⊗k}` when `E` has uniform certificate
/// `C > 0` and `R^L(u, ū) ≥ -B |u|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwistBound {
    pub c: f64,
    pub b: f64,
    pub k: u32,
    /// `ceil(kB/C) + 1`.
    pub m_min: u32,
    /// `m_min·C − k·B`, the guaranteed lower bound at `m_min`.
    pub margin: f64,
    /// `m_min − kB/C`, the bound after rescaling to `C = 1`; at least 1.
    pub normalized_margin: f64,
}

impl TwistBound {
    /// Guaranteed lower bound `m·C − k·B` for any `m`.
    pub fn bound(&self, m: u32) -> f64 {
        m as f64 * self.c - self.k as f64 * self.b
    }
}

pub fn twist_threshold(c: f64, b: f64, k: u32) -> Result<TwistBound> {
    if !(c > 0.0) {
        return Err(Error::NonPositiveConstant(c));
    }
    if !(b >= 0.0) || k == 0 {
        return Err(Error::Invalid(format!(
            "twist requires B ≥ 0 and k ≥ 1 (got B = {b}, k = {k})"
        )));
    }
    let ratio = k as f64 * b / c;
    let m_min = ratio.ceil() as u32 + 1;
    Ok(TwistBound {
        c,
        b,
        k,
        m_min,
        margin: m_min as f64 * c - k as f64 * b,
        normalized_margin: m_min as f64 - ratio,
    })
}

/// `R^{E^{⊗m} ⊗ L^{⊗k}}(u, ū, ·, ·)`: the tensor-power form plus
/// `k · R^L(u, ū)` times the identity.
pub fn twisted_form<T: Real>(
    r: &CurvatureTensor<T>,
    h_p: &CMatrix<T>,
    m: u32,
    u: &[C<T>],
    line_curvature: T,
    k: u32,
) -> Result<CMatrix<T>> {
    let q = tensor_power_form(r, h_p, m, u)?;
    let shift = line_curvature * T::lit(k as f64);
    Ok(q.add(&CMatrix::identity(q.rows()).scale(re(shift))))
}

/// Largest `B ≥ 0` with `R^L(u, ū) ≥ -B |u|²_ω |v|²_h` on the grid, for a
/// line bundle (`r = 1`).
pub fn line_bundle_negativity_bound<T: Real>(spec: &BundleSpec, grid: &SampleGrid) -> Result<T> {
    if spec.r() != 1 {
        return Err(Error::DimensionMismatch {
            what: "line bundle rank".into(),
            expected: 1,
            found: spec.r(),
        });
    }
    let mut b = T::zero();
    for (idx, p) in grid.checked_points(spec.domain())?.iter().enumerate() {
        let p: Vec<C<T>> = to_scalar(p);
        let step = || -> Result<T> {
            let r = crate::curvature::chern_curvature_at(spec, &p)?;
            let h = spec.metric_at(&p)?[(0, 0)].re;
            let w = spec.omega_at(&p)?;
            let form = r.form_in_fiber_direction(&[re(T::one())]).scale(re(T::one() / h));
            let e = hermitian_eigen(&form.congruence(&unitary_frame(&w)?))?;
            Ok(-e.min())
        };
        b = b.max(step().map_err(|e| e.at_point(idx))?);
    }
    Ok(b)
}

/// Curvature of `e^{-f} h` from that of `h`: `e^{-f}(R_{ij̄αβ̄} + f_{ij̄} h_{αβ̄})`.
pub fn conformal_curvature<T: Real>(
    r: &CurvatureTensor<T>,
    h_p: &CMatrix<T>,
    f: &MixedJet<T>,
) -> Result<CurvatureTensor<T>> {
    if f.value.im.abs() > T::tol(1e-10) * (T::one() + f.value.re.abs()) {
        return Err(Error::Invalid("conformal factor must be real-valued".into()));
    }
    let scale = (-f.value.re).exp();
    Ok(CurvatureTensor::from_fn(r.n(), r.r(), |i, j, a, b| {
        (r.get(i, j, a, b) + f.hess[(i, j)] * h_p[(a, b)]).scale(scale)
    }))
}

/// Inputs and constants of the cutoff construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationPlan {
    #[serde(serialize_with = "serialize_expression")]
    pub phi: Expression,
    pub s_points: Vec<Vec<Complex64>>,
    pub x_points: Vec<Vec<Complex64>>,
    /// Uniform certificate on `X ∖ S`.
    pub c: f64,
    /// `max_X` of `-λ_min(∂∂̄Φ)` against `ω`, floored at zero.
    pub observed_negativity: f64,
    /// `max(observed_negativity, c_tilde_1)`.
    pub c_tilde: f64,
    /// `min_S λ_min(∂∂̄Φ)` against `ω`.
    pub c_tilde_1: f64,
    /// `C / (2 C̃)`; the conformal factor is `f = f_scale · Φ`.
    pub f_scale: f64,
    /// `C · C̃₁ / (2 C̃)`.
    pub c1: f64,
}

fn serialize_expression<S: serde::Serializer>(e: &Expression, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

/// Smallest eigenvalue of `∂∂̄Φ` against `ω` at `p`.
fn psh_lambda_min(spec: &BundleSpec, phi: &Expression, p: &[Complex64]) -> Result<f64> {
    let jet = phi.eval_jet(p)?;
    let w = spec.omega_at(p)?;
    let hess = jet.hess.congruence(&unitary_frame(&w)?);
    Ok(hermitian_eigen(&hess)?.min())
}

/// Computes the cutoff constants. `c` is the uniform certificate of the
/// bundle on `X ∖ S`; `Φ` must be strictly plurisubharmonic on `S`.
pub fn build_cutoff(
    spec: &BundleSpec,
    phi: &Expression,
    s_points: &[Vec<Complex64>],
    x_points: &[Vec<Complex64>],
    c: f64,
) -> Result<PerturbationPlan> {
    if !(c > 0.0) {
        return Err(Error::NonPositiveConstant(c));
    }
    if phi.dim() != spec.n() {
        return Err(Error::DimensionMismatch {
            what: "potential chart dimension".into(),
            expected: spec.n(),
            found: phi.dim(),
        });
    }
    if s_points.is_empty() {
        return Err(Error::Invalid("excised set has no sample points".into()));
    }
    let mut c_tilde_1 = f64::INFINITY;
    let mut worst_s = 0;
    for (idx, p) in s_points.iter().enumerate() {
        let l = psh_lambda_min(spec, phi, p).map_err(|e| e.at_point(idx))?;
        if l < c_tilde_1 {
            c_tilde_1 = l;
            worst_s = idx;
        }
    }
    if !(c_tilde_1 > 0.0) {
        return Err(Error::NotStrictlyPsh {
            min_eigenvalue: c_tilde_1,
            point: worst_s,
        });
    }
    let mut observed_negativity = 0.0f64;
    for (idx, p) in x_points.iter().enumerate() {
        let l = psh_lambda_min(spec, phi, p).map_err(|e| e.at_point(idx))?;
        observed_negativity = observed_negativity.max(-l);
    }
    let c_tilde = observed_negativity.max(c_tilde_1);
    Ok(PerturbationPlan {
        phi: phi.clone(),
        s_points: s_points.to_vec(),
        x_points: x_points.to_vec(),
        c,
        observed_negativity,
        c_tilde,
        c_tilde_1,
        f_scale: c / (2.0 * c_tilde),
        c1: c * c_tilde_1 / (2.0 * c_tilde),
    })
}

/// Per-point comparison of the recertified constant against the bound
/// `e^{-f}·min(C₁, C/2)`, both measured with fibers normalized in `h`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbedPoint {
    pub index: usize,
    pub f: f64,
    /// `e^{-f} · C_uniform(h̃)`.
    pub certificate: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationOutcome {
    #[serde(skip)]
    pub spec: BundleSpec,
    pub metric: Vec<String>,
    pub report: PositivityReport<f64>,
    pub points: Vec<PerturbedPoint>,
    pub worst_slack: f64,
}

/// Slack allowed in the per-point bound.
pub const PERTURB_BOUND_TOL: f64 = 1e-6;

/// Rewrites the metric as `exp(-f_scale·Φ)·h` and recertifies over the
/// plan's `X` points.
pub fn perturb_metric(
    spec: &BundleSpec,
    plan: &PerturbationPlan,
    budget: &SearchBudget,
) -> Result<PerturbationOutcome> {
    let factor = Node::exp(Node::neg(Node::mul(Node::real(plan.f_scale), plan.phi.root().clone())));
    let n = spec.n();
    let new_spec = spec.map_metric(|e| {
        Expression::new(Node::mul(factor.clone(), e.root().clone()), n).expect("rewritten metric stays on the chart")
    })?;
    let report = certify_points::<f64>(&new_spec, &plan.x_points, budget)?;
    let floor = plan.c1.min(plan.c / 2.0);
    let mut points = Vec::with_capacity(report.points.len());
    let mut worst_slack = f64::INFINITY;
    for rec in &report.points {
        let f = plan.f_scale * plan.phi.eval_value(&plan.x_points[rec.index])?.re;
        let w = (-f).exp();
        let certificate = w * rec.c_uniform;
        let bound = w * floor;
        worst_slack = worst_slack.min(certificate - bound);
        points.push(PerturbedPoint {
            index: rec.index,
            f,
            certificate,
            bound,
        });
    }
    if !(report.global_c > 0.0) {
        return Err(Error::Recertification {
            point: report.worst_point,
            detail: format!("recertified constant {:e} is not positive", report.global_c),
        });
    }
    if let Some(bad) = points.iter().find(|p| p.certificate < p.bound - PERTURB_BOUND_TOL) {
        return Err(Error::Recertification {
            point: bad.index,
            detail: format!("certificate {:e} below bound {:e}", bad.certificate, bad.bound),
        });
    }
    Ok(PerturbationOutcome {
        metric: new_spec.h_entries().iter().map(|e| e.to_string()).collect(),
        spec: new_spec,
        report,
        points,
        worst_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    #[test]
    fn dual_of_line_bundle() {
        let mut t = CurvatureTensor::zeros(1, 1);
        t.set(0, 0, 0, 0, c(2.0, 0.0));
        let d = dual_curvature(&t, &CMatrix::identity(1)).unwrap();
        assert_eq!(d.get(0, 0, 0, 0), c(-2.0, 0.0));
        let z = dual_curvature(&CurvatureTensor::<f64>::zeros(2, 2), &CMatrix::identity(2)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn kronecker_sum_spectrum() {
        let q = CMatrix::<f64>::diagonal(&[1.0, 3.0]);
        let k = kronecker_sum(&q, 2).unwrap();
        let e = hermitian_eigen(&k).unwrap();
        let want = [2.0, 4.0, 4.0, 6.0];
        for (a, b) in e.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(kronecker_sum(&q, 1).unwrap(), q);
        assert!(matches!(
            kronecker_sum(&CMatrix::<f64>::identity(4), 7),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn certificates_scale() {
        assert_eq!(sym_power_certificate(2.0, 3), 6.0);
        assert_eq!(wedge_power_certificate(0.0, 4), 0.0);
    }

    #[test]
    fn determinant_line_form_is_trace() {
        let t = CurvatureTensor::from_fn(1, 2, |_, _, a, b| {
            [[c(1.0, 0.0), c(0.2, 0.3)], [c(0.2, -0.3), c(2.5, 0.0)]][a][b]
        });
        let u = [c(1.0, 0.0)];
        let w = wedge_power_form(&t, &CMatrix::identity(2), 2, &u).unwrap();
        assert_eq!((w.rows(), w.cols()), (1, 1));
        assert!((w[(0, 0)] - c(3.5, 0.0)).norm() < 1e-12);
        let s = sym_power_form(&t, &CMatrix::identity(2), 2, &u).unwrap();
        assert_eq!(s.rows(), 3);
        let lmin = hermitian_eigen(&s).unwrap().min();
        let base = hermitian_eigen(&t.form_in_base_direction(&u)).unwrap().min();
        assert!(lmin >= 2.0 * base - 1e-12);
    }

    #[test]
    fn twist_examples() {
        assert_eq!(twist_threshold(1.0, 2.0, 3).unwrap().m_min, 7);
        assert_eq!(twist_threshold(2.0, 0.0, 5).unwrap().m_min, 1);
        assert_eq!(twist_threshold(0.5, 1.0, 1).unwrap().m_min, 3);
        assert!(matches!(
            twist_threshold(0.0, 1.0, 1),
            Err(Error::NonPositiveConstant(_))
        ));
        let t = twist_threshold(0.7, 0.9, 2).unwrap();
        assert!(t.normalized_margin >= 1.0);
        assert!((t.margin - t.bound(t.m_min)).abs() < 1e-15);
    }

    #[test]
    fn conformal_of_flat() {
        let spec = BundleSpec::parse(1, 2, &["1", "0", "0", "1"]).unwrap();
        let f = Expression::parse("abs2(z1)", 1).unwrap();
        let p = [c(0.4, -0.2)];
        let jet = f.eval_jet(&p).unwrap();
        let t = conformal_curvature(&CurvatureTensor::zeros(1, 2), &spec.metric_at(&p).unwrap(), &jet).unwrap();
        let w = (-0.2f64).exp();
        assert!((t.get(0, 0, 0, 0) - c(w, 0.0)).norm() < 1e-14);
        assert!((t.get(0, 0, 1, 1) - c(w, 0.0)).norm() < 1e-14);
        assert!(t.get(0, 0, 0, 1).norm() < 1e-14);
    }

    #[test]
    fn cutoff_constants() {
        let spec = BundleSpec::parse(1, 1, &["1"]).unwrap();
        let phi = Expression::parse("abs2(z1)", 1).unwrap();
        let s = vec![vec![Complex64::new(0.0, 0.0)]];
        let x = SampleGrid::uniform(spec.domain(), 5).points();
        let plan = build_cutoff(&spec, &phi, &s, &x, 1.0).unwrap();
        assert_eq!(plan.c_tilde_1, 1.0);
        assert_eq!(plan.c_tilde, 1.0);
        assert_eq!(plan.f_scale, 0.5);
        assert_eq!(plan.c1, 0.5);

        let zero = Expression::parse("0", 1).unwrap();
        assert!(matches!(
            build_cutoff(&spec, &zero, &s, &x, 1.0),
            Err(Error::NotStrictlyPsh { .. })
        ));
        assert!(matches!(
            build_cutoff(&spec, &phi, &s, &x, 0.0),
            Err(Error::NonPositiveConstant(_))
        ));

        // indefinite somewhere: ∂∂̄(abs2(z1) - abs2(z1)^2) = 1 - 4|z|²
        let mixed = Expression::parse("abs2(z1) - abs2(z1)^2", 1).unwrap();
        let plan = build_cutoff(&spec, &mixed, &s, &x, 1.0).unwrap();
        assert!((plan.observed_negativity - 7.0).abs() < 1e-12);
        assert_eq!(plan.c_tilde, plan.observed_negativity);
    }
}
