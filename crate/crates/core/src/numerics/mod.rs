//! Dense linear algebra, seeded randomness and the DFT.
//!
//! Everything here is single-threaded and allocates fresh outputs, so calls
//! are safe from any thread and results never depend on scheduling.

mod dft;
mod eigen;
mod matrix;
mod rng;

pub use dft::{dft_direct, dft_real};
pub use eigen::{jacobi_eig, singular_values, EigenDecomposition};
pub use matrix::{dot, norm, Matrix};
pub use rng::{gaussian_sample, RngStream};
pub use rustfft::num_complex::Complex64;
