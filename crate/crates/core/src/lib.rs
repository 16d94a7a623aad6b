//! Executable constructions for semisprays on iterated tangent bundles.
//!
//! The crate evaluates iterated complete lifts `S^(r)` of a semispray by
//! running its coefficients `G^i` over truncated multi-jets
//! ([`multidual`]), integrates their geodesics ([`flow`]), relates them to
//! multi-parameter geodesic variations ([`variation`]) and, for sprays,
//! builds Jacobi tensors, Riccati operators, shape operators and
//! pre-semigeodesic charts along a geodesic ([`jacobi`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod cli;
pub mod error;
pub mod flow;
pub mod jacobi;
pub(crate) mod linalg;
mod mask;
pub mod multidual;
pub mod spray;
pub mod variation;

pub use bundle::BundlePoint;
pub use error::{GeomError, Result};
pub use flow::GeodesicRecord;
pub use multidual::MultiDual;
pub use spray::Semispray;
pub use variation::GeodesicVariation;
