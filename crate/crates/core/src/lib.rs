//! Φ-variation of Takagi-class functions along dyadic partitions.
//!
//! The crate evaluates functions `f(t) = Σ α_m σ_m(t) φ(2^m t)` built from the
//! tent map `φ`, computes their dyadic increments exactly, and measures the
//! resulting Φ-variation and power variation sums together with their
//! limiting Bernoulli-convolution moments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dyadic;
pub mod error;
pub mod limits;
pub mod numeric;
pub mod regvar;
pub mod scheme;
pub mod variation;

pub use error::{Error, Result};
