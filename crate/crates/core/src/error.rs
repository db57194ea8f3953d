use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("{what} is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { what: String, min_eigenvalue: f64 },

    #[error("singular metric: Cholesky pivot {pivot:e} below threshold")]
    SingularMetric { pivot: f64 },

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("point lies outside the chart domain: {0}")]
    OutOfDomain(String),

    #[error("finite-difference step {step:e} too large: point within {margin:e} of the domain boundary")]
    StepTooLarge { step: f64, margin: f64 },

    #[error("section component {index} is not holomorphic")]
    NonHolomorphic { index: usize },

    #[error("zero direction")]
    ZeroDirection,

    #[error("certificate constant must be positive, got {0:e}")]
    NonPositiveConstant(f64),

    #[error("potential is not strictly plurisubharmonic on the excised set (min eigenvalue {min_eigenvalue:e} at point {point})")]
    NotStrictlyPsh { min_eigenvalue: f64, point: usize },

    #[error("tensor power dimension {size} exceeds limit {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("recertification failed at grid point {point}: {detail}")]
    Recertification { point: usize, detail: String },

    #[error("Finsler metric rejected at sample {sample}: {reason}")]
    Finsler { sample: usize, reason: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("at grid point {point}: {source}")]
    AtPoint {
        point: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn at_point(self, point: usize) -> Self {
        match self {
            e @ Error::AtPoint { .. } => e,
            e => Error::AtPoint {
                point,
                source: Box::new(e),
            },
        }
    }
}
