//! Squared Bessel processes whose dimension varies in time.
//!
//! `dX = (2β_u X + δ_u) du + 2√X dW` with piecewise `δ` and `β`. The crate
//! computes Laplace transforms of additive functionals through the
//! characteristic ODE, decomposes bridges into mixtures, samples endpoints
//! and conditional integrals exactly by transform inversion, and builds
//! model adapters and pricing routines on top.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapters;
pub mod error;
pub mod finance;
pub mod inversion;
pub mod mixture;
pub mod oracle;
pub mod propagator;
pub mod quad;
pub mod samplers;
pub mod scalar;
pub mod time;
pub mod transforms;
pub mod validation;

pub use error::{GbesqError, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
