//! Covariance-operator and density-operator dynamics for open quantum
//! systems, together with their realization as zero-mean complex Gaussian
//! random fields.
//!
//! Quantum states are trace-normalized covariance operators of classical
//! Gaussian fields. This crate propagates covariances under linear and affine
//! generators, propagates the induced nonlinear density flow, samples the
//! underlying fields and stochastic paths, and checks the identities that tie
//! the two pictures together.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod expm;
pub mod generators;
pub mod matrix_json;
pub mod operator;
pub mod prequantum;
pub mod random;
pub mod rng;
pub mod stochastic;
pub mod table;

pub use error::{Error, Result};
pub use operator::{CMatrix, CVector, DensityOperator, HermitianOperator, PositiveOperator};
