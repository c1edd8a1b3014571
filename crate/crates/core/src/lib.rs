//! Simulation and parameter estimation for diagonalizable parabolic SPDEs
//! driven by multiplicative fractional Brownian motion.
//!
//! The model lives in spectral coordinates ([`specmodel`]); every Fourier
//! mode is an explicit functional of one shared fBM path ([`fbm`],
//! [`solution`]). Estimators: maximum likelihood through the kernel
//! transform ([`mkernel`], [`mle`]), accelerated mode sequences
//! ([`accel`]), and closed-form exact estimators ([`exact`]). The
//! [`harness`] module runs replicated Monte Carlo experiments.

pub mod accel;
pub mod error;
pub mod exact;
pub mod fbm;
pub mod grid;
pub mod harness;
pub mod mkernel;
pub mod mle;
pub mod quadrature;
pub mod rng;
pub mod solution;
pub mod specmodel;
pub mod stats;

pub use error::{Error, Result};
