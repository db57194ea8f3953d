//! Expression language for metric entries and potentials.
//!
//! Expressions are built over chart coordinates `z1..zm` and their
//! conjugates. Evaluation yields either a plain value or a [`MixedJet`]
//! carrying exact first Wirtinger derivatives and the mixed Hessian.

mod diff;
mod jet;
mod parse;
mod print;

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::scalar::{Real, C};

pub use jet::MixedJet;
pub use parse::{parse, parse_with_fiber};

/// Syntax tree node. Variables are 0-based internally.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(Complex64),
    Var(usize),
    Conj(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Pow(Box<Node>, i32),
    Exp(Box<Node>),
    Log(Box<Node>),
    Abs2(Box<Node>),
}

impl Node {
    pub fn constant(z: Complex64) -> Node {
        Node::Const(z)
    }

    pub fn real(x: f64) -> Node {
        Node::Const(Complex64::new(x, 0.0))
    }

    fn as_const(&self) -> Option<Complex64> {
        match self {
            Node::Const(z) => Some(*z),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_const() == Some(Complex64::new(0.0, 0.0))
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(Complex64::new(1.0, 0.0))
    }

    /// Largest variable index plus one, or 0 for constants.
    pub fn var_bound(&self) -> usize {
        match self {
            Node::Const(_) => 0,
            Node::Var(k) => k + 1,
            Node::Conj(a) | Node::Neg(a) | Node::Pow(a, _) | Node::Exp(a) | Node::Log(a) | Node::Abs2(a) => {
                a.var_bound()
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.var_bound().max(b.var_bound()),
        }
    }

    /// True when the tree has no conjugation (explicit or through `abs2`).
    pub fn is_holomorphic(&self) -> bool {
        match self {
            Node::Const(_) | Node::Var(_) => true,
            Node::Conj(_) | Node::Abs2(_) => false,
            Node::Neg(a) | Node::Pow(a, _) | Node::Exp(a) | Node::Log(a) => a.is_holomorphic(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.is_holomorphic() && b.is_holomorphic()
            }
        }
    }

    // Folding constructors. They keep generated trees (derivatives,
    // substitutions) small; they never change the value of an expression.

    pub fn add(a: Node, b: Node) -> Node {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Node::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Node::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Node, b: Node) -> Node {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Node::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Node::neg(b),
            _ => Node::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Node, b: Node) -> Node {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Node::Const(x * y),
            _ if a.is_zero() || b.is_zero() => Node::real(0.0),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Node::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Node, b: Node) -> Node {
        if b.is_one() {
            return a;
        }
        if a.is_zero() && !b.is_zero() {
            return Node::real(0.0);
        }
        Node::Div(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Node) -> Node {
        match a {
            Node::Const(x) => Node::Const(-x),
            Node::Neg(inner) => *inner,
            other => Node::Neg(Box::new(other)),
        }
    }

    pub fn conj(a: Node) -> Node {
        match a {
            Node::Const(x) => Node::Const(x.conj()),
            Node::Conj(inner) => *inner,
            other => Node::Conj(Box::new(other)),
        }
    }

    pub fn pow(a: Node, k: i32) -> Node {
        match k {
            0 => Node::real(1.0),
            1 => a,
            _ => Node::Pow(Box::new(a), k),
        }
    }

    pub fn exp(a: Node) -> Node {
        if a.is_zero() {
            return Node::real(1.0);
        }
        Node::Exp(Box::new(a))
    }

    pub fn log(a: Node) -> Node {
        if a.is_one() {
            return Node::real(0.0);
        }
        Node::Log(Box::new(a))
    }

    pub fn abs2(a: Node) -> Node {
        Node::Abs2(Box::new(a))
    }

    /// Replaces every `Var(k)` by `images[k]`.
    pub fn substitute(&self, images: &[Node]) -> Node {
        match self {
            Node::Const(z) => Node::Const(*z),
            Node::Var(k) => images[*k].clone(),
            Node::Conj(a) => Node::conj(a.substitute(images)),
            Node::Add(a, b) => Node::add(a.substitute(images), b.substitute(images)),
            Node::Sub(a, b) => Node::sub(a.substitute(images), b.substitute(images)),
            Node::Mul(a, b) => Node::mul(a.substitute(images), b.substitute(images)),
            Node::Div(a, b) => Node::div(a.substitute(images), b.substitute(images)),
            Node::Neg(a) => Node::neg(a.substitute(images)),
            Node::Pow(a, k) => Node::pow(a.substitute(images), *k),
            Node::Exp(a) => Node::exp(a.substitute(images)),
            Node::Log(a) => Node::log(a.substitute(images)),
            Node::Abs2(a) => Node::abs2(a.substitute(images)),
        }
    }
}

/// A parsed expression together with the chart dimension it lives on.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    root: Node,
    dim: usize,
}

impl Expression {
    /// Wraps a tree, checking that every variable index is below `dim`.
    pub fn new(root: Node, dim: usize) -> Result<Self, ParseError> {
        let bound = root.var_bound();
        if bound > dim {
            return Err(ParseError {
                line: 0,
                column: 0,
                kind: ParseErrorKind::VarOutOfRange { index: bound, dim },
            });
        }
        Ok(Self { root, dim })
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self, ParseError> {
        parse(src, dim)
    }

    pub fn constant(z: Complex64, dim: usize) -> Self {
        Self {
            root: Node::Const(z),
            dim,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_holomorphic(&self) -> bool {
        self.root.is_holomorphic()
    }

    /// Same tree viewed on a chart with more coordinates.
    pub fn widen(&self, dim: usize) -> Self {
        assert!(dim >= self.dim, "widen cannot shrink the chart");
        Self {
            root: self.root.clone(),
            dim,
        }
    }

    /// Composes with a coordinate change: variable `k` becomes `images[k]`,
    /// an expression on a chart of dimension `new_dim`.
    pub fn substitute(&self, images: &[Node], new_dim: usize) -> Result<Self, ParseError> {
        if images.len() < self.dim {
            return Err(ParseError {
                line: 0,
                column: 0,
                kind: ParseErrorKind::VarOutOfRange {
                    index: self.dim,
                    dim: images.len(),
                },
            });
        }
        Self::new(self.root.substitute(images), new_dim)
    }

    /// Symbolic `∂/∂z_var` (or `∂/∂z̄_var` when `conj`), treating `z` and
    /// `z̄` as independent.
    pub fn wirtinger(&self, var: usize, conj: bool) -> Self {
        Self {
            root: diff::wirtinger(&self.root, var, conj),
            dim: self.dim,
        }
    }

    pub fn eval_value<T: Real>(&self, p: &[C<T>]) -> Result<C<T>, EvalError> {
        self.check_point(p.len())?;
        jet::eval_value(&self.root, p)
    }

    pub fn eval_jet<T: Real>(&self, p: &[C<T>]) -> Result<MixedJet<T>, EvalError> {
        self.check_point(p.len())?;
        jet::eval_jet(&self.root, p)
    }

    fn check_point(&self, len: usize) -> Result<(), EvalError> {
        if len != self.dim {
            return Err(EvalError {
                kind: EvalErrorKind::PointDimension {
                    expected: self.dim,
                    found: len,
                },
                subexpr: self.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.root, f)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    UnexpectedToken { expected: String, found: String },
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEnd(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("variable index {index} out of range for chart dimension {dim}")]
    VarOutOfRange { index: usize, dim: usize },
    #[error("malformed number `{0}`")]
    BadNumber(String),
}

/// Parse failure with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalErrorKind {
    #[error("log of a value that is not positive real")]
    LogNonPositive,
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value")]
    NonFinite,
    #[error("point has {found} coordinates, chart has {expected}")]
    PointDimension { expected: usize, found: usize },
}

/// Evaluation failure naming the offending subexpression.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("{kind} in `{subexpr}`")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub subexpr: String,
}

/// A point of a chart, `coords.len()` equal to the chart dimension.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ChartPoint<T> {
    pub coords: Vec<C<T>>,
}

impl<T: Real> ChartPoint<T> {
    pub fn new(coords: Vec<C<T>>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}
