//! Quasiprobabilistic likelihood-ratio estimation with negatively weighted data.
//!
//! The crate is `no_std` (with `alloc`) and carries no IO. It provides:
//!
//! - [`nn`]: a fixed-topology MLP with exact reverse-mode gradients, Adam and
//!   an early-stopping training loop over weighted data.
//! - [`losses`]: weighted BCE/MSE, the pole-adjusted ratio estimation (PARE)
//!   loss and the classifier/ratio maps that go with each.
//! - [`quasidata`]: signed two-dimensional Gaussian mixtures with analytic
//!   densities, CDFs and ratios, plus weighted and inverse-transform samplers.
//! - [`rosmm`]: the ratio of signed mixtures model, its sub-ratio training,
//!   coefficient estimation and PARE-based tuning.
//! - [`eval`]: reweighting, weighted histograms and closure metrics.
//!
//! The `std` feature (on by default) switches the float intrinsics to the
//! platform math library and enables runtime CPU dispatch for the GEMM kernels.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod losses;
pub mod math;
pub mod nn;
pub mod quasidata;
pub mod rng;
pub mod rosmm;

pub use error::{Error, Result};
