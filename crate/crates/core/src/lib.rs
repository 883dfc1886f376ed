//! Computational random-matrix laboratory for the circular law.
//!
//! The crate pairs two sides of the same object:
//!
//! * the sampled side: dense and Bernoulli-sparsified i.i.d. matrices
//!   ([`ensemble`]), their eigenvalues and singular values ([`linalg`]) and
//!   the empirical distributions built from them ([`measures`]);
//! * the limiting side: the cubic self-consistent equation for the
//!   Hermitized Stieltjes transform, the limiting singular-value law and the
//!   logarithmic potential of the uniform disc ([`limit`]).
//!
//! [`invertibility`] holds the smallest-singular-value machinery (vector
//! geometry, concentration functions, tail experiments) and [`experiments`]
//! ties both sides together in reproducible, config-driven campaigns.
// Negated comparisons reject NaN on purpose; index loops mirror the kernels' math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod invertibility;
pub mod limit;
pub mod linalg;
pub mod measures;
pub(crate) mod quad;

pub use error::{Error, Result};
pub use num_complex::Complex64;
