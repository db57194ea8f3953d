//! Pointwise and grid certificates for the positivity hierarchy.
//!
//! Every search runs in unitary frames: base directions are normalized in
//! `ω`, fiber vectors in `h`. Values are therefore the constants of
//! `R(u,ū,v,v̄) ≥ C |u|²_ω |v|²_h`. All certificates come from multi-start
//! local search on spheres; they are sampling certificates, not proofs.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{to_scalar, BundleSpec, SampleGrid};
use crate::curvature::{chern_curvature_at, CurvatureTensor};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, orthogonal_complement, unitary_frame, CMatrix};
use crate::scalar::{Real, C};
use crate::sphere::{maximize, maximize_in_span, Ascent, SearchBudget};

/// Values within `(-ZERO_BAND, ZERO_BAND]` count as zero when classifying.
pub const ZERO_BAND: f64 = 1e-8;

/// Label attached to every report.
pub const CERTIFICATE_KIND: &str = "sampling certificate";

/// Sign class of the curvature at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    /// Uniformly RC-positive.
    Positive,
    /// Uniformly RC-negative.
    Negative,
    /// Uniformly RC-semi-positive: some direction with `Q_u ≥ 0`.
    SemiPositive,
    /// Uniformly RC-semi-negative.
    SemiNegative,
    Mixed,
}

/// Sign class over a whole grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridClass {
    Positive,
    Negative,
    /// Semi-positive everywhere and positive somewhere.
    QuasiPositive,
    QuasiNegative,
    SemiPositive,
    SemiNegative,
    Mixed,
}

/// Classifies from the uniform positive and negative certificates.
pub fn classify_point(c_uniform: f64, c_uniform_negative: f64) -> PointClass {
    if c_uniform > ZERO_BAND {
        PointClass::Positive
    } else if c_uniform_negative > ZERO_BAND {
        PointClass::Negative
    } else if c_uniform > -ZERO_BAND {
        PointClass::SemiPositive
    } else if c_uniform_negative > -ZERO_BAND {
        PointClass::SemiNegative
    } else {
        PointClass::Mixed
    }
}

pub fn classify_grid(classes: &[PointClass]) -> GridClass {
    use PointClass::*;
    let all = |f: &dyn Fn(PointClass) -> bool| classes.iter().all(|c| f(*c));
    let any = |c: PointClass| classes.contains(&c);
    if all(&|c| c == Positive) {
        GridClass::Positive
    } else if all(&|c| c == Negative) {
        GridClass::Negative
    } else if all(&|c| c == Positive || c == SemiPositive) {
        if any(Positive) {
            GridClass::QuasiPositive
        } else {
            GridClass::SemiPositive
        }
    } else if all(&|c| c == Negative || c == SemiNegative) {
        if any(Negative) {
            GridClass::QuasiNegative
        } else {
            GridClass::SemiNegative
        }
    } else {
        GridClass::Mixed
    }
}

/// `λ_min(M)` with the matching eigenvector.
fn lambda_min<T: Real>(m: &CMatrix<T>) -> (T, Vec<C<T>>) {
    let e = hermitian_eigen(m).expect("curvature forms are Hermitian");
    (e.min(), e.vector(0))
}

/// `max_{|u|=1} λ_min(sign · Q_u)` for a tensor already in unitary frames.
///
/// With `y` the bottom eigenvector of `sign · Q_u`, the value is
/// `sign · P_v(u)` for `v = conj(y)`, whose gradient is `2 sign · P_vᵀ u`.
fn maximin<T: Real>(t: &CurvatureTensor<T>, sign: T, basis: Option<&CMatrix<T>>, budget: &SearchBudget) -> Ascent<T> {
    let f = |u: &[C<T>]| {
        let q = t.form_in_base_direction(u).scale(C::new(sign, T::zero()));
        let (val, y) = lambda_min(&q);
        let v: Vec<C<T>> = y.iter().map(|z| z.conj()).collect();
        let pt = t.form_in_fiber_direction(&v).transpose();
        let g = pt.mul_vec(u).iter().map(|z| z.scale(sign + sign)).collect();
        (val, g)
    };
    match basis {
        None => maximize(t.n(), f, budget),
        Some(b) => maximize_in_span(b, f, budget),
    }
}

/// Mirror of [`maximin`] with base and fiber roles swapped:
/// `max_{|v|=1} λ_min(sign · P_v)`.
fn maximin_fiber<T: Real>(t: &CurvatureTensor<T>, sign: T, budget: &SearchBudget) -> Ascent<T> {
    let f = |v: &[C<T>]| {
        let p = t.form_in_fiber_direction(v).scale(C::new(sign, T::zero()));
        let (val, y) = lambda_min(&p);
        let u: Vec<C<T>> = y.iter().map(|z| z.conj()).collect();
        let qt = t.form_in_base_direction(&u).transpose();
        let g = qt.mul_vec(v).iter().map(|z| z.scale(sign + sign)).collect();
        (val, g)
    };
    maximize(t.r(), f, budget)
}

/// Curvature in unitary frames for `ω_p` (base) and `h_p` (fiber), together
/// with the frames themselves.
pub struct FramedTensor<T> {
    pub tensor: CurvatureTensor<T>,
    pub base_frame: CMatrix<T>,
    pub fiber_frame: CMatrix<T>,
}

impl<T: Real> FramedTensor<T> {
    pub fn new(r: &CurvatureTensor<T>, omega_p: &CMatrix<T>, h_p: &CMatrix<T>) -> Result<Self> {
        if omega_p.rows() != r.n() || h_p.rows() != r.r() {
            return Err(Error::Invalid(format!(
                "metrics of size {}/{} do not fit a tensor with n = {}, r = {}",
                omega_p.rows(),
                h_p.rows(),
                r.n(),
                r.r()
            )));
        }
        let base_frame = unitary_frame(omega_p)?;
        let fiber_frame = unitary_frame(h_p)?;
        Ok(Self {
            tensor: r.in_frames(&base_frame, &fiber_frame),
            base_frame,
            fiber_frame,
        })
    }

    /// Already-unitary tensor; frames are the identity.
    pub fn unitary(r: CurvatureTensor<T>) -> Self {
        Self {
            base_frame: CMatrix::identity(r.n()),
            fiber_frame: CMatrix::identity(r.r()),
            tensor: r,
        }
    }
}

/// `(Q_u)[α][β] = Σ R[i][j][α][β] u_i conj(u_j)`.
pub fn form_in_base_direction<T: Real>(r: &CurvatureTensor<T>, u: &[C<T>]) -> Result<CMatrix<T>> {
    if u.len() != r.n() {
        return Err(Error::DimensionMismatch {
            what: "base direction".into(),
            expected: r.n(),
            found: u.len(),
        });
    }
    Ok(r.form_in_base_direction(u))
}

/// `(P_v)[i][j] = Σ R[i][j][α][β] v_α conj(v_β)`.
pub fn form_in_fiber_direction<T: Real>(r: &CurvatureTensor<T>, v: &[C<T>]) -> Result<CMatrix<T>> {
    if v.len() != r.r() {
        return Err(Error::DimensionMismatch {
            what: "fiber direction".into(),
            expected: r.r(),
            found: v.len(),
        });
    }
    Ok(r.form_in_fiber_direction(v))
}

/// Optimum of a sphere search with its witness in original coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witnessed<T> {
    pub value: T,
    pub witness: Vec<C<T>>,
    pub converged: bool,
}

/// `C_uniform = max_{|u|_ω=1} λ_min(Q_u)` with fibers normalized in `h`.
pub fn uniform_rc_certificate_at<T: Real>(
    r: &CurvatureTensor<T>,
    omega_p: &CMatrix<T>,
    h_p: &CMatrix<T>,
    budget: &SearchBudget,
) -> Result<Witnessed<T>> {
    let ft = FramedTensor::new(r, omega_p, h_p)?;
    let a = maximin(&ft.tensor, T::one(), None, budget);
    Ok(Witnessed {
        value: a.value,
        witness: ft.base_frame.mul_vec(&a.x),
        converged: a.converged,
    })
}

/// `C_rc = min_{|v|_h=1} λ_max(P_v)` with base directions normalized in `ω`.
pub fn rc_certificate_at<T: Real>(
    r: &CurvatureTensor<T>,
    omega_p: &CMatrix<T>,
    h_p: &CMatrix<T>,
    budget: &SearchBudget,
) -> Result<Witnessed<T>> {
    let ft = FramedTensor::new(r, omega_p, h_p)?;
    let a = maximin_fiber(&ft.tensor, -T::one(), budget);
    Ok(Witnessed {
        value: -a.value,
        witness: ft.fiber_frame.mul_vec(&a.x),
        converged: a.converged,
    })
}

/// `min_{|u|_ω=1} λ_min(Q_u)`; positive exactly when Griffiths positive.
pub fn griffiths_min_at<T: Real>(
    r: &CurvatureTensor<T>,
    omega_p: &CMatrix<T>,
    h_p: &CMatrix<T>,
    budget: &SearchBudget,
) -> Result<Witnessed<T>> {
    let ft = FramedTensor::new(r, omega_p, h_p)?;
    let a = minimin(&ft.tensor, budget);
    Ok(Witnessed {
        value: a.value,
        witness: ft.base_frame.mul_vec(&a.x),
        converged: a.converged,
    })
}

/// `min_u λ_min(Q_u)` as `-max_u (-λ_min(Q_u))`; `-λ_min(Q_u) = λ_max(-Q_u)`
/// is the value of `-P_v(u)` at the bottom eigenvector.
fn minimin<T: Real>(t: &CurvatureTensor<T>, budget: &SearchBudget) -> Ascent<T> {
    let f = |u: &[C<T>]| {
        let q = t.form_in_base_direction(u);
        let (val, y) = lambda_min(&q);
        let v: Vec<C<T>> = y.iter().map(|z| z.conj()).collect();
        let pt = t.form_in_fiber_direction(&v).transpose();
        let g = pt.mul_vec(u).iter().map(|z| z.scale(-T::lit(2.0))).collect();
        (-val, g)
    };
    let a = maximize(t.n(), f, budget);
    Ascent {
        value: -a.value,
        x: a.x,
        converged: a.converged,
    }
}

/// Greedy count of `ω`-orthonormal directions `u_1, …, u_k`, each with
/// `λ_min(Q_{u_i}) > tol`. Each step searches the orthogonal complement of
/// the directions already chosen.
pub fn k_direction_count<T: Real>(
    r: &CurvatureTensor<T>,
    omega_p: &CMatrix<T>,
    h_p: &CMatrix<T>,
    budget: &SearchBudget,
    tol: T,
) -> Result<usize> {
    let ft = FramedTensor::new(r, omega_p, h_p)?;
    Ok(k_directions_framed(&ft.tensor, budget, tol, None))
}

fn k_directions_framed<T: Real>(
    t: &CurvatureTensor<T>,
    budget: &SearchBudget,
    tol: T,
    first: Option<Ascent<T>>,
) -> usize {
    let n = t.n();
    let mut chosen: Vec<Vec<C<T>>> = Vec::new();
    let mut next = first;
    while chosen.len() < n {
        let a = match next.take() {
            Some(a) => a,
            None => {
                let basis = orthogonal_complement(n, &chosen);
                if basis.cols() == 0 {
                    break;
                }
                maximin(t, T::one(), Some(&basis), budget)
            }
        };
        if a.value <= tol {
            break;
        }
        chosen.push(a.x);
    }
    chosen.len()
}

/// Everything certified at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointCertificate<T> {
    pub index: usize,
    pub point: Vec<C<T>>,
    pub c_uniform: T,
    pub u_star: Vec<C<T>>,
    pub c_rc: T,
    pub v_star: Vec<C<T>>,
    pub griffiths_min: T,
    /// `max_{|u|_ω=1} λ_min(-Q_u)`; positive when uniformly RC-negative.
    pub c_uniform_negative: T,
    pub k_directions: usize,
    pub class: PointClass,
    pub unconverged: bool,
}

/// Runs every pointwise certificate for a curvature tensor.
pub fn certify_point<T: Real>(
    index: usize,
    point: Vec<C<T>>,
    r: &CurvatureTensor<T>,
    omega_p: &CMatrix<T>,
    h_p: &CMatrix<T>,
    budget: &SearchBudget,
) -> Result<PointCertificate<T>> {
    let ft = FramedTensor::new(r, omega_p, h_p)?;
    let t = &ft.tensor;
    let up = maximin(t, T::one(), None, budget);
    let rc = maximin_fiber(t, -T::one(), budget);
    let gr = minimin(t, budget);
    let neg = maximin(t, -T::one(), None, budget);
    let c_uniform = up.value;
    let griffiths_min = gr.value.min(c_uniform);
    let unconverged = !(up.converged && rc.converged && gr.converged && neg.converged);
    let tol = T::tol(ZERO_BAND);
    let k_directions = k_directions_framed(t, budget, tol, Some(up.clone()));
    Ok(PointCertificate {
        index,
        point,
        c_uniform,
        u_star: ft.base_frame.mul_vec(&up.x),
        c_rc: -rc.value,
        v_star: ft.fiber_frame.mul_vec(&rc.x),
        griffiths_min,
        c_uniform_negative: neg.value,
        k_directions,
        class: classify_point(c_uniform.to_f64_lossy(), neg.value.to_f64_lossy()),
        unconverged,
    })
}

/// Grid-wide certificate: per-point records in grid order and the global
/// constant `C = min_q C_uniform(q)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivityReport<T> {
    pub kind: &'static str,
    pub points: Vec<PointCertificate<T>>,
    pub global_c: T,
    pub worst_point: usize,
    /// `min_q` of the negative uniform certificates; positive when every
    /// point is uniformly RC-negative.
    pub global_c_negative: T,
    pub class: GridClass,
    pub unconverged_points: usize,
}

impl<T: Real> PositivityReport<T> {
    pub fn from_points(points: Vec<PointCertificate<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("no grid points to certify".into()));
        }
        let (worst_point, global_c) = points.iter().enumerate().fold((0, T::infinity()), |(wi, wv), (i, p)| {
            if p.c_uniform < wv {
                (i, p.c_uniform)
            } else {
                (wi, wv)
            }
        });
        let global_c_negative = points.iter().fold(T::infinity(), |m, p| m.min(p.c_uniform_negative));
        let classes: Vec<PointClass> = points.iter().map(|p| p.class).collect();
        Ok(Self {
            kind: CERTIFICATE_KIND,
            class: classify_grid(&classes),
            unconverged_points: points.iter().filter(|p| p.unconverged).count(),
            global_c,
            worst_point,
            global_c_negative,
            points,
        })
    }
}

/// Certifies every grid point in parallel; records come back in grid order.
pub fn certify_grid<T: Real>(
    spec: &BundleSpec,
    grid: &SampleGrid,
    budget: &SearchBudget,
) -> Result<PositivityReport<T>> {
    let pts = grid.checked_points(spec.domain())?;
    certify_points(spec, &pts, budget)
}

/// [`certify_grid`] over an explicit list of points.
pub fn certify_points<T: Real>(
    spec: &BundleSpec,
    pts: &[Vec<Complex64>],
    budget: &SearchBudget,
) -> Result<PositivityReport<T>> {
    let records = pts
        .par_iter()
        .enumerate()
        .map(|(idx, p)| {
            let p: Vec<C<T>> = to_scalar(p);
            let run = || -> Result<PointCertificate<T>> {
                let r = chern_curvature_at(spec, &p)?;
                let h = spec.metric_at(&p)?;
                let w = spec.omega_at(&p)?;
                certify_point(idx, p.clone(), &r, &w, &h, budget)
            };
            run().map_err(|e| e.at_point(idx))
        })
        .collect::<Result<Vec<_>>>()?;
    PositivityReport::from_points(records)
}
