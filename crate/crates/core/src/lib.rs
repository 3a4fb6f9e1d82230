//! Degenerate two-species reaction-diffusion on the unit-measure ball, with an
//! executable version of the log-convexity / observation-estimate proof chain.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is off.
//! Everything here is pure computation; file formats and the command line live
//! in the companion `rdlc` crate.
//!
//! Module map:
//! - [`grid`]: unit-measure ball, finite-volume grids, Neumann Laplacian,
//!   quadrature, first Neumann eigenvalue.
//! - [`weight`]: the weight `ψ`, tilted exponents `Φ_i`, multipliers `η_i`,
//!   sampled geometry constants.
//! - [`solver`]: catalyst fields, initial data, IMEX time stepping.
//! - [`diagnostics`]: trace series, decay-rate fits, invariant audit.
//! - [`logconv`]: tilted state, quadratic forms, frequency function,
//!   interpolation-lemma checker, observation-estimate checks.
//! - [`ledger`]: every constant of the proof chain with provenance.
//! - [`ext`]: extended-range reals for constants far outside `f64` range.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diagnostics;
pub mod error;
pub mod ext;
pub mod grid;
pub mod ledger;
mod linalg;
pub mod logconv;
mod quad;
pub mod solver;
pub mod tolerances;
pub mod weight;

pub use error::{Error, Result};
pub use ext::Ext;
