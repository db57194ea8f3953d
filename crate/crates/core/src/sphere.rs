//! Multi-start projected gradient ascent on the unit sphere of `ℂ^d`, and
//! deterministic sphere samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::linalg::CMatrix;
use crate::scalar::{c, czero, inner, re, vec_norm, Real, C};

/// Search effort for every sphere optimization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchBudget {
    /// Number of starting points, including the coordinate axes.
    pub starts: usize,
    /// Iteration cap per start.
    pub iterations: usize,
    /// Convergence tolerance on the objective value.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            starts: 64,
            iterations: 200,
            tol: 1e-9,
            seed: 0x5eed,
        }
    }
}

/// Best point found by [`maximize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Ascent<T> {
    pub value: T,
    pub x: Vec<C<T>>,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn normalized<T: Real>(mut v: Vec<C<T>>) -> Vec<C<T>> {
    let n = vec_norm(&v);
    for z in v.iter_mut() {
        *z = *z / n;
    }
    v
}

/// Starting points: coordinate axes, the diagonal, then seeded Gaussian
/// directions, `budget.starts` in total (at least one).
pub fn starting_points<T: Real>(dim: usize, budget: &SearchBudget) -> Vec<Vec<C<T>>> {
    let total = budget.starts.max(1);
    let mut out = Vec::with_capacity(total);
    for k in 0..dim.min(total) {
        let mut e = vec![czero(); dim];
        e[k] = re(T::one());
        out.push(e);
    }
    if dim > 1 && out.len() < total {
        out.push(normalized(vec![re(T::one()); dim]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    while out.len() < total {
        let v: Vec<C<T>> = (0..dim)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                c(T::lit(a), T::lit(b))
            })
            .collect();
        if vec_norm(&v) > T::lit(1e-12) {
            out.push(normalized(v));
        }
    }
    out
}

/// Maximizes `f` over the unit sphere of `ℂ^dim`.
///
/// `f` returns the value and its gradient `2 ∂f/∂x̄` (the real gradient
/// packed as a complex vector). Ties between starts keep the earliest.
pub fn maximize<T, F>(dim: usize, f: F, budget: &SearchBudget) -> Ascent<T>
where
    T: Real,
    F: Fn(&[C<T>]) -> (T, Vec<C<T>>),
{
    let mut best: Option<Ascent<T>> = None;
    for x0 in starting_points(dim, budget) {
        let run = ascend(x0, &f, budget);
        if best.as_ref().map_or(true, |b| run.value > b.value) {
            best = Some(run);
        }
    }
    best.expect("at least one start")
}

/// Maximizes `f` over unit vectors in the span of the orthonormal columns
/// of `basis`. Returned points are in the ambient space.
pub fn maximize_in_span<T, F>(basis: &CMatrix<T>, f: F, budget: &SearchBudget) -> Ascent<T>
where
    T: Real,
    F: Fn(&[C<T>]) -> (T, Vec<C<T>>),
{
    let adj = basis.adjoint();
    let inner_f = |coef: &[C<T>]| {
        let x = basis.mul_vec(coef);
        let (v, g) = f(&x);
        (v, adj.mul_vec(&g))
    };
    let a = maximize(basis.cols(), inner_f, budget);
    Ascent {
        value: a.value,
        x: basis.mul_vec(&a.x),
        converged: a.converged,
    }
}

fn ascend<T, F>(mut x: Vec<C<T>>, f: &F, budget: &SearchBudget) -> Ascent<T>
where
    T: Real,
    F: Fn(&[C<T>]) -> (T, Vec<C<T>>),
{
    let tol = T::lit(budget.tol);
    let armijo = T::lit(ARMIJO);
    let (mut value, mut grad) = f(&x);
    let mut step = T::one();
    let mut converged = false;
    for _ in 0..budget.iterations {
        let radial = inner(&x, &grad).re;
        let tangent: Vec<C<T>> = grad.iter().zip(&x).map(|(g, xi)| g - xi.scale(radial)).collect();
        let slope = tangent.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        if slope.sqrt() <= T::epsilon() * (T::one() + value.abs()) {
            converged = true;
            break;
        }
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = normalized(x.iter().zip(&tangent).map(|(xi, ti)| xi + ti.scale(step)).collect());
            let (tv, tg) = f(&trial);
            if tv >= value + armijo * step * slope {
                accepted = Some((trial, tv, tg));
                break;
            }
            step = step * T::lit(0.5);
        }
        let Some((nx, nv, ng)) = accepted else {
            converged = true;
            break;
        };
        let gain = nv - value;
        x = nx;
        value = nv;
        grad = ng;
        step = step * T::lit(2.0);
        if gain <= tol * (T::one() + value.abs()) {
            converged = true;
            break;
        }
    }
    Ascent { value, x, converged }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// `count` unit vectors in `ℂ^dim` from a Halton sequence pushed through
/// the Box–Muller map. Deterministic; `dim ≤ 8`.
pub fn halton_sphere<T: Real>(dim: usize, count: usize) -> Vec<Vec<C<T>>> {
    assert!(dim <= PRIMES.len() / 2, "halton_sphere supports dim ≤ 8");
    let tau = std::f64::consts::TAU;
    (1..)
        .map(|k: u64| {
            (0..dim)
                .map(|j| {
                    let u1 = radical_inverse(k, PRIMES[2 * j]);
                    let u2 = radical_inverse(k, PRIMES[2 * j + 1]);
                    let rad = (-2.0 * (1.0 - u1).max(1e-300).ln()).sqrt();
                    c(T::lit(rad * (tau * u2).cos()), T::lit(rad * (tau * u2).sin()))
                })
                .collect::<Vec<_>>()
        })
        .filter(|v| vec_norm(v) > T::lit(1e-9))
        .take(count)
        .map(normalized)
        .collect()
}
