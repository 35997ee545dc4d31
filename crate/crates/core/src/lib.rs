//! Models and algorithms for CSI-free remote state estimation over MIMO
//! fading channels with semantic analog aggregation.
//!
//! Sensors transmit the discrepancy `C_m (x − x̂ᶠ)` between their measurement
//! and the estimator's broadcast prediction. Over an analog-aggregation
//! channel the received sum is exactly the Kalman innovation, so the
//! estimator can apply a constant gain `K` designed offline and never needs
//! channel state information.
//!
//! Modules:
//! - [`numerics`]: dense matrices, factorizations, seeded sampling
//! - [`plant`]: plant dynamics, sensor topology, activation, signal extraction
//! - [`channel`]: fading realizations, aggregation, LS pilots, SNR calibration
//! - [`estimation`]: Kalman recursion and the constant-gain estimator
//! - [`gain_design`]: drift and stability analysis, CSSCA gain optimizer
//!
//! The crate is `no_std` with `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod channel;
pub mod error;
pub mod estimation;
pub mod gain_design;
pub mod numerics;
pub mod plant;

pub use error::{Error, Result};
pub use numerics::{Matrix, RandomSource};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
