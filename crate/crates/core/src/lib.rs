//! Chern curvature of Hermitian holomorphic vector bundles on coordinate
//! charts, and sampling certificates for (uniform) RC-positivity.
//!
//! Every numerical routine is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the scalar to `f64`.

pub mod bundle;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod fd;
pub mod functorial;
pub mod hsc;
pub mod linalg;
pub mod positivity;
pub mod projectivize;
pub mod scalar;
pub mod sphere;
pub mod synthetic;

pub use bundle::{Axis, BundleSpec, CoordBox, SampleGrid};
pub use curvature::{chern_curvature_at, curvature_fd_oracle, CurvatureTensor};
pub use error::{Error, Result};
pub use expr::{Expression, MixedJet};
pub use hsc::{HscPoint, HscReport};
pub use linalg::CMatrix;
pub use positivity::{GridClass, PointCertificate, PointClass, PositivityReport};
pub use projectivize::{FinslerSpec, ProjChart, ProjSpace};
pub use scalar::{Real, C};
pub use sphere::SearchBudget;

pub type C64 = C<f64>;
pub type C32 = C<f32>;
pub type CMatrix64 = CMatrix<f64>;
pub type CMatrix32 = CMatrix<f32>;
pub type MixedJet64 = MixedJet<f64>;
pub type CurvatureTensor64 = CurvatureTensor<f64>;
pub type CurvatureTensor32 = CurvatureTensor<f32>;
pub type PointCertificate64 = PointCertificate<f64>;
pub type PositivityReport64 = PositivityReport<f64>;
pub type HscReport64 = HscReport<f64>;
