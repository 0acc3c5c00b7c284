//! Learned Fourier feature networks and their neural tangent kernels.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: matrices, seeded RNG streams, DFT and a Jacobi eigensolver.
//! - [`nets`]: ReLU MLPs with an optional Fourier feature input layer,
//!   exact backpropagation, SGD/Adam and a regression training loop.
//! - [`ntk`]: closed-form and empirical tangent kernels, circulant spectra,
//!   the deep ReLU kernel recursion, gradient-flow residuals and the
//!   Bellman contraction conditions.
//! - [`mdp`]: gridworlds, Q-iteration, supervised and noisy Q* regression and
//!   fitted Q-iteration with feature-rank diagnostics.
//! - [`experiments`]: the config-driven runner behind the `lff-lab` binary.

pub mod error;
pub mod experiments;
pub mod mdp;
pub mod nets;
pub mod ntk;
pub mod numerics;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream};
