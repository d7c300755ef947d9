//! Zero-forcing MIMO performance under transmit-correlated Rician and
//! Rayleigh fading.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`] builds the correlated Rician channel model and samples it.
//! - [`schur`] holds the block partitionings, the UL factor of the
//!   transmit covariance, Schur complements of the Gramian and the
//!   mean/correlation condition under which the Schur complement of the
//!   Gramian is central Wishart.
//! - [`hypergeom`] evaluates `0F0(S, Λ)` of two matrix arguments by
//!   determinantal formulas, the scalar `1F1`, and a Haar Monte Carlo oracle.
//! - [`snrdist`] provides the Gamma SNR laws (exact and virtual) and the
//!   moment generating functions used downstream.
//! - [`aep`] turns m.g.f.s into MPSK average error probabilities.
//! - [`mcsim`] is the Monte Carlo link simulator used to validate all of the
//!   above.
//! - [`cli`] wires scenarios, fading cases and methods into CSV tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aep;
pub mod channel;
pub mod cli;
mod error;
pub mod hypergeom;
pub mod linalg;
pub mod mcsim;
pub mod quadrature;
pub mod rng;
pub mod schur;
pub mod snrdist;

pub use error::{Error, Result};

/// Complex double-precision scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
