//! Power-based direction-of-arrival estimation with a single multi-mode antenna.
//!
//! The per-port power pattern is expanded in a Fourier (2D) or real spherical
//! harmonic (3D) basis. Received power is modelled by its exact noncentral
//! chi-square law and a Gaussian approximation, which drives a maximum-likelihood
//! angle estimator and the matching Cramér–Rao bound.

pub mod basis;
pub mod crb;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod pattern;
pub mod signal;

pub use error::{Error, Result};
