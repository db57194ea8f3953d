//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use serde::Serialize;

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Default + Serialize + Send + Sync + 'static
{
    /// Converts an `f64` literal. Used for tolerances and parsed constants.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// A tolerance calibrated for `f64`, widened for coarser scalars by
    /// `sqrt(ε / ε_f64)`.
    #[inline]
    fn tol(x: f64) -> Self {
        let widen = (Self::epsilon().to_f64().unwrap_or(f64::EPSILON) / f64::EPSILON).sqrt();
        Self::lit(x * widen)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over the crate scalar.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn re<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

/// Converts an `f64` complex constant into the working scalar.
#[inline]
pub(crate) fn from_c64<T: Real>(z: Complex<f64>) -> C<T> {
    Complex::new(T::lit(z.re), T::lit(z.im))
}

/// Euclidean norm of a complex vector.
pub fn vec_norm<T: Real>(v: &[C<T>]) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Hermitian inner product `Σ conj(a_k) b_k`.
pub fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x.conj() * y)
}
