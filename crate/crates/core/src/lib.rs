//! Symbolic-numeric differential geometry on a single chart of R^3 or R^4.
//!
//! Everything is built on exact expression trees ([`expr::Expr`]): vector
//! fields, differential forms and endomorphism fields carry closed-form
//! coefficients, so Lie brackets, exterior derivatives and the pointwise
//! linear solves stay symbolic. Floating point enters only when an object is
//! evaluated at a [`Point`].
//!
//! The crate is `no_std`-compatible (enable the `libm` feature instead of
//! `std`); it performs no IO. The companion CLI crate carries manifests,
//! reports and file formats.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod almost_complex;
pub mod distribution;
pub mod expr;
pub mod exterior;
mod fmath;
pub mod linalg;
pub mod monge_ampere;
mod scalar;
pub mod tolerances;

pub use expr::{EvalError, Expr, ParseError, Point};
pub use scalar::Scalar;
pub use tolerances::Tolerances;
