//! Orthogonal polynomials, localized kernels and Bernstein inequalities on
//! conic domains: the conic surface `V₀^{d+1}`, the solid cone `V^{d+1}` and,
//! through an affine map, the triangle `T²`.
//!
//! Polynomial recurrences are generic over [`Scalar`], implemented for `f64`,
//! `f32` and the truncated Taylor jets [`Jet`] that carry exact derivatives.
//! Quadrature, Gram matrices, eigenproblems and reports work in `f64`; the
//! aliases below name the concrete types used there.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bases;
pub mod bernstein;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod operators;
pub mod pointsets;
pub mod quadrature;
pub mod sampling;
pub mod scalar;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Jet, Scalar};

/// Working precision of quadrature, Gram matrices and reports.
pub type Real = f64;

/// First-order jet over [`Real`] (value and first derivative).
pub type Jet1 = Jet<Real, 2>;

/// Second-order jet over [`Real`].
pub type Jet2 = Jet<Real, 3>;

/// Dense matrix type of the Gram engines.
pub type Matrix = nalgebra::DMatrix<Real>;

/// Crate version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
