// Parameter guards use `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Count-data models built from independent exponential interarrival times
//! where exactly one event (the γ-th) has a different rate.
//!
//! The crate provides:
//!
//! - [`sue`] — the single-unusual-event (SUE) probability mass function in
//!   two algebraically equivalent forms, closed-form moments, and dispersion
//!   classification;
//! - [`baseline`] — Poisson and gamma-count probability functions used as
//!   regression baselines;
//! - [`special`] — the regularized incomplete gamma function the gamma-count
//!   model needs;
//! - [`regression`] — log-link count regression: datasets, linear predictors,
//!   log-likelihood and finite-difference gradients;
//! - [`optimize`] — BFGS with a strong-Wolfe line search, standard errors from
//!   the observed information, and a γ-scan;
//! - [`simulate`] — a Monte Carlo oracle that samples the counting process
//!   directly from its interarrival times.
//!
//! The crate is `no_std` (with `alloc`); all floating-point math goes through
//! `libm`. Everything is pure and immutable after construction, so concurrent
//! use needs no synchronization.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baseline;
pub mod error;
pub mod linalg;
pub mod math;
pub mod optimize;
pub mod regression;
pub mod simulate;
pub mod special;
pub mod sue;

pub use error::NumericError;
pub use optimize::{FitResult, OptimizerSettings, ScanRow, StartStrategy};
pub use regression::{CoefVector, CountDataset, Family, RegressionSpec};
pub use simulate::{EmpiricalPmf, GofResult, SimSettings};
pub use sue::{Dispersion, MomentSummary, PmfEntry, PmfForm, PmfTable, SueParams};
