//! Second-order mixed Wirtinger jets and forward evaluation.

use serde::Serialize;

use super::{EvalError, EvalErrorKind, Node};
use crate::linalg::CMatrix;
use crate::scalar::{cone, czero, from_c64, re, Real, C};

/// Value, `∂/∂z_i`, `∂/∂z̄_j` and `∂²/∂z_i∂z̄_j` of a function at a point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixedJet<T> {
    pub value: C<T>,
    pub dz: Vec<C<T>>,
    pub dzbar: Vec<C<T>>,
    /// `hess[(i, j)] = ∂²f/∂z_i∂z̄_j`.
    pub hess: CMatrix<T>,
}

impl<T: Real> MixedJet<T> {
    pub fn constant(value: C<T>, m: usize) -> Self {
        Self {
            value,
            dz: vec![czero(); m],
            dzbar: vec![czero(); m],
            hess: CMatrix::zeros(m, m),
        }
    }

    pub fn variable(k: usize, value: C<T>, m: usize) -> Self {
        let mut j = Self::constant(value, m);
        j.dz[k] = cone();
        j
    }

    pub fn dim(&self) -> usize {
        self.dz.len()
    }

    pub fn conj(&self) -> Self {
        let m = self.dim();
        Self {
            value: self.value.conj(),
            dz: self.dzbar.iter().map(|z| z.conj()).collect(),
            dzbar: self.dz.iter().map(|z| z.conj()).collect(),
            hess: CMatrix::from_fn(m, m, |i, j| self.hess[(j, i)].conj()),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            value: self.value + o.value,
            dz: self.dz.iter().zip(&o.dz).map(|(a, b)| a + b).collect(),
            dzbar: self.dzbar.iter().zip(&o.dzbar).map(|(a, b)| a + b).collect(),
            hess: self.hess.add(&o.hess),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self {
            value: self.value - o.value,
            dz: self.dz.iter().zip(&o.dz).map(|(a, b)| a - b).collect(),
            dzbar: self.dzbar.iter().zip(&o.dzbar).map(|(a, b)| a - b).collect(),
            hess: self.hess.sub(&o.hess),
        }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self {
            value: self.value * s,
            dz: self.dz.iter().map(|a| a * s).collect(),
            dzbar: self.dzbar.iter().map(|a| a * s).collect(),
            hess: self.hess.scale(s),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-cone::<T>())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (u, v) = (self.value, o.value);
        let m = self.dim();
        Self {
            value: u * v,
            dz: (0..m).map(|i| self.dz[i] * v + u * o.dz[i]).collect(),
            dzbar: (0..m).map(|i| self.dzbar[i] * v + u * o.dzbar[i]).collect(),
            hess: CMatrix::from_fn(m, m, |i, j| {
                self.hess[(i, j)] * v + self.dz[i] * o.dzbar[j] + self.dzbar[j] * o.dz[i] + u * o.hess[(i, j)]
            }),
        }
    }

    /// Composition with a holomorphic function `g` given `g(u)`, `g'(u)`, `g''(u)`.
    pub fn compose(&self, g0: C<T>, g1: C<T>, g2: C<T>) -> Self {
        let m = self.dim();
        Self {
            value: g0,
            dz: self.dz.iter().map(|a| g1 * a).collect(),
            dzbar: self.dzbar.iter().map(|a| g1 * a).collect(),
            hess: CMatrix::from_fn(m, m, |i, j| g2 * self.dz[i] * self.dzbar[j] + g1 * self.hess[(i, j)]),
        }
    }

    /// `1/u`; the caller guarantees `u != 0`.
    pub fn recip(&self) -> Self {
        let r = self.value.inv();
        self.compose(r, -r * r, (r * r * r).scale(T::lit(2.0)))
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    /// Principal logarithm; the caller validates the argument.
    pub fn ln(&self) -> Self {
        let r = self.value.inv();
        self.compose(self.value.ln(), r, -r * r)
    }

    pub fn powi(&self, k: i32) -> Self {
        match k {
            0 => Self::constant(cone(), self.dim()),
            1 => self.clone(),
            _ => {
                let u = self.value;
                let kk = T::lit(k as f64);
                let km1 = T::lit((k - 1) as f64);
                self.compose(u.powi(k), u.powi(k - 1).scale(kk), u.powi(k - 2).scale(kk * km1))
            }
        }
    }

    pub fn abs2(&self) -> Self {
        self.mul(&self.conj())
    }

    /// Largest `|hess[i][j] - conj(hess[j][i])|`.
    pub fn hermitian_defect(&self) -> T {
        self.hess.hermitian_defect()
    }
}

fn fail(kind: EvalErrorKind, node: &Node) -> EvalError {
    EvalError {
        kind,
        subexpr: node.to_string(),
    }
}

fn log_domain_ok<T: Real>(z: C<T>) -> bool {
    z.re > T::zero() && z.im.abs() <= T::epsilon().sqrt() * z.norm()
}

fn finite<T: Real>(z: C<T>, node: &Node) -> Result<C<T>, EvalError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(fail(EvalErrorKind::NonFinite, node))
    }
}

/// Plain value of `node` at `p`.
pub(super) fn eval_value<T: Real>(node: &Node, p: &[C<T>]) -> Result<C<T>, EvalError> {
    let v = match node {
        Node::Const(z) => from_c64(*z),
        Node::Var(k) => p[*k],
        Node::Conj(a) => eval_value(a, p)?.conj(),
        Node::Add(a, b) => eval_value(a, p)? + eval_value(b, p)?,
        Node::Sub(a, b) => eval_value(a, p)? - eval_value(b, p)?,
        Node::Mul(a, b) => eval_value(a, p)? * eval_value(b, p)?,
        Node::Div(a, b) => {
            let num = eval_value(a, p)?;
            let den = eval_value(b, p)?;
            if den == czero() {
                return Err(fail(EvalErrorKind::DivisionByZero, node));
            }
            num / den
        }
        Node::Neg(a) => -eval_value(a, p)?,
        Node::Pow(a, k) => {
            let u = eval_value(a, p)?;
            if *k < 0 && u == czero() {
                return Err(fail(EvalErrorKind::DivisionByZero, node));
            }
            u.powi(*k)
        }
        Node::Exp(a) => eval_value(a, p)?.exp(),
        Node::Log(a) => {
            let u = eval_value(a, p)?;
            if !log_domain_ok(u) {
                return Err(fail(EvalErrorKind::LogNonPositive, node));
            }
            re(u.norm().ln())
        }
        Node::Abs2(a) => re(eval_value(a, p)?.norm_sqr()),
    };
    finite(v, node)
}

/// Jet of `node` at `p`, with one Wirtinger direction per coordinate.
pub(super) fn eval_jet<T: Real>(node: &Node, p: &[C<T>]) -> Result<MixedJet<T>, EvalError> {
    let m = p.len();
    let j = match node {
        Node::Const(z) => MixedJet::constant(from_c64(*z), m),
        Node::Var(k) => MixedJet::variable(*k, p[*k], m),
        Node::Conj(a) => eval_jet(a, p)?.conj(),
        Node::Add(a, b) => eval_jet(a, p)?.add(&eval_jet(b, p)?),
        Node::Sub(a, b) => eval_jet(a, p)?.sub(&eval_jet(b, p)?),
        Node::Mul(a, b) => eval_jet(a, p)?.mul(&eval_jet(b, p)?),
        Node::Div(a, b) => {
            let num = eval_jet(a, p)?;
            let den = eval_jet(b, p)?;
            if den.value == czero() {
                return Err(fail(EvalErrorKind::DivisionByZero, node));
            }
            num.div(&den)
        }
        Node::Neg(a) => eval_jet(a, p)?.neg(),
        Node::Pow(a, k) => {
            let u = eval_jet(a, p)?;
            if *k < 0 && u.value == czero() {
                return Err(fail(EvalErrorKind::DivisionByZero, node));
            }
            u.powi(*k)
        }
        Node::Exp(a) => eval_jet(a, p)?.exp(),
        Node::Log(a) => {
            let u = eval_jet(a, p)?;
            if !log_domain_ok(u.value) {
                return Err(fail(EvalErrorKind::LogNonPositive, node));
            }
            let mut out = u.ln();
            out.value = re(u.value.norm().ln());
            out
        }
        Node::Abs2(a) => {
            let mut out = eval_jet(a, p)?.abs2();
            out.value = re(out.value.re);
            out
        }
    };
    finite(j.value, node)?;
    let bad =
        j.dz.iter()
            .chain(&j.dzbar)
            .chain(j.hess.as_slice())
            .any(|z| !(z.re.is_finite() && z.im.is_finite()));
    if bad {
        return Err(fail(EvalErrorKind::NonFinite, node));
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::super::parse;
    use super::*;

    fn c(a: f64, b: f64) -> Complex64 {
        Complex64::new(a, b)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn bilinear_form() {
        let e = parse("z1*conj(z1)", 1).unwrap();
        let j = e.eval_jet(&[c(1.0, 0.0)]).unwrap();
        assert!(close(j.value, c(1.0, 0.0)));
        assert!(close(j.dz[0], c(1.0, 0.0)));
        assert!(close(j.dzbar[0], c(1.0, 0.0)));
        assert!(close(j.hess[(0, 0)], c(1.0, 0.0)));
    }

    #[test]
    fn log_at_origin() {
        let e = parse("log(1+abs2(z1))", 1).unwrap();
        let j = e.eval_jet(&[c(0.0, 0.0)]).unwrap();
        assert!(close(j.value, c(0.0, 0.0)));
        assert!(close(j.dz[0], c(0.0, 0.0)));
        assert!(close(j.dzbar[0], c(0.0, 0.0)));
        assert!(close(j.hess[(0, 0)], c(1.0, 0.0)));
    }

    #[test]
    fn mixed_exponential() {
        let e = parse("exp(z1+conj(z2))", 2).unwrap();
        let j = e.eval_jet(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(close(j.value, c(1.0, 0.0)));
        assert_eq!(j.dz, vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(j.dzbar, vec![c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(close(j.hess[(0, 1)], c(1.0, 0.0)));
        assert!(close(j.hess[(0, 0)], c(0.0, 0.0)));
        assert!(close(j.hess[(1, 0)], c(0.0, 0.0)));
        assert!(close(j.hess[(1, 1)], c(0.0, 0.0)));
    }

    #[test]
    fn values() {
        let v = |s: &str, p: Complex64| parse(s, 1).unwrap().eval_value(&[p]).unwrap();
        assert!(close(v("1+0*z1", c(4.0, -2.0)), c(1.0, 0.0)));
        assert!(close(v("abs2(z1)", c(0.0, 3.0)), c(9.0, 0.0)));
        assert!(close(v("log(1+abs2(z1))", c(1.0, 0.0)), c(2f64.ln(), 0.0)));
    }

    #[test]
    fn domain_errors_name_subexpression() {
        let e = parse("1 + log(z1 - 1)", 1).unwrap();
        let err = e.eval_value(&[c(0.5, 0.0)]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::LogNonPositive);
        assert_eq!(err.subexpr, "log(z1-1.0)");
        let err = e.eval_jet(&[c(0.5, 0.0)]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::LogNonPositive);

        let e = parse("z1/(z1-2)", 1).unwrap();
        let err = e.eval_jet(&[c(2.0, 0.0)]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        assert_eq!(err.subexpr, "z1/(z1-2.0)");

        let e = parse("z1^(-1)", 1).unwrap();
        assert_eq!(
            e.eval_value(&[c(0.0, 0.0)]).unwrap_err().kind,
            EvalErrorKind::DivisionByZero
        );
    }

    #[test]
    fn holomorphic_has_no_antiholomorphic_part() {
        let e = parse("exp(z1*z2)/(2+z1^2) - log(3+z2)", 2).unwrap();
        let j = e.eval_jet(&[c(0.3, 0.1), c(-0.2, 0.4)]);
        // log of a complex value is outside the domain; use a real point instead
        assert!(j.is_err());
        let j = e.eval_jet(&[c(0.3, 0.0), c(-0.2, 0.0)]).unwrap();
        assert!(j.dzbar.iter().all(|z| *z == c(0.0, 0.0)));
        assert!(j.hess.as_slice().iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn single_precision() {
        let e = parse("abs2(z1)*exp(-abs2(z1))", 1).unwrap();
        let j = e.eval_jet(&[num_complex::Complex32::new(0.5, 0.5)]).unwrap();
        // |z|² e^{-|z|²}, hess = (1 - 3|z|² + |z|⁴) e^{-|z|²}
        let x = 0.5f32;
        let want = (1.0 - 3.0 * x + x * x) * (-x).exp();
        assert!((j.hess[(0, 0)].re - want).abs() < 1e-6);
    }
}
