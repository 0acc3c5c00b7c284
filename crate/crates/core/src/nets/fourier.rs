use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{contract, mismatch, Result};
use crate::numerics::{gaussian_sample, Matrix, RngStream};

/// Switches of the Fourier input layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourierOptions {
    /// Multiply the projection by `2π` before `sin`/`cos`.
    pub include_two_pi: bool,
    /// Append the raw input after the sin and cos blocks.
    pub concat_input: bool,
    /// Whether the basis receives gradients.
    pub trainable: bool,
}

impl Default for FourierOptions {
    fn default() -> Self {
        Self {
            include_two_pi: true,
            concat_input: true,
            trainable: true,
        }
    }
}

impl FourierOptions {
    /// Bare `[sin(Bx); cos(Bx)]` embedding used by the kernel analysis.
    pub fn kernel_analysis() -> Self {
        Self {
            include_two_pi: false,
            concat_input: false,
            trainable: true,
        }
    }
}

/// Fourier feature embedding `x ↦ [sin(cBx); cos(cBx); x]`.
///
/// `basis` has shape `(d_fourier / 2) x d_input`; `c` is `2π` or `1`.
#[derive(Clone, Debug)]
pub struct FourierLayer {
    pub basis: Matrix,
    pub options: FourierOptions,
    pub(crate) grad: Matrix,
}

impl FourierLayer {
    pub fn new(basis: Matrix, options: FourierOptions) -> Result<Self> {
        if basis.rows() == 0 || basis.cols() == 0 {
            return Err(contract("FourierLayer::new", "empty basis"));
        }
        let grad = Matrix::zeros(basis.rows(), basis.cols());
        Ok(Self {
            basis,
            options,
            grad,
        })
    }

    pub fn d_input(&self) -> usize {
        self.basis.cols()
    }

    pub fn d_fourier(&self) -> usize {
        2 * self.basis.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.d_fourier() + if self.options.concat_input { self.d_input() } else { 0 }
    }

    pub(crate) fn frequency_scale(&self) -> f64 {
        if self.options.include_two_pi {
            2.0 * PI
        } else {
            1.0
        }
    }

    pub fn grad(&self) -> &Matrix {
        &self.grad
    }

    /// Embedding of a single input vector.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_input() {
            return Err(mismatch(
                "lff_embed",
                format!("input of length {} for basis with {} columns", x.len(), self.d_input()),
            ));
        }
        let proj: Vec<f64> = self
            .basis
            .matvec(x)?
            .into_iter()
            .map(|p| p * self.frequency_scale())
            .collect();
        let mut out = Vec::with_capacity(self.output_dim());
        out.extend(proj.iter().map(|p| p.sin()));
        out.extend(proj.iter().map(|p| p.cos()));
        if self.options.concat_input {
            out.extend_from_slice(x);
        }
        Ok(out)
    }

    /// Batched projection `c · X Bᵀ`.
    pub(crate) fn project(&self, xs: &Matrix) -> Result<Matrix> {
        if xs.cols() != self.d_input() {
            return Err(mismatch(
                "FourierLayer::forward",
                format!("batch with {} columns for basis with {}", xs.cols(), self.d_input()),
            ));
        }
        Ok(xs.matmul_transb(&self.basis)?.scale(self.frequency_scale()))
    }

    /// Embedding rows given the cached projection.
    pub(crate) fn embed_projected(&self, xs: &Matrix, proj: &Matrix) -> Matrix {
        let half = self.basis.rows();
        let d = self.d_input();
        let width = self.output_dim();
        Matrix::from_fn(xs.rows(), width, |i, j| {
            if j < half {
                proj[(i, j)].sin()
            } else if j < 2 * half {
                proj[(i, j - half)].cos()
            } else {
                debug_assert!(j - 2 * half < d);
                xs[(i, j - 2 * half)]
            }
        })
    }

    /// Population standard deviation over all basis entries.
    pub fn basis_stddev(&self) -> f64 {
        let b = self.basis.as_slice();
        let n = b.len() as f64;
        let mean = b.iter().sum::<f64>() / n;
        (b.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// Basis with i.i.d. `N(0, σ²)` entries.
pub fn init_gaussian_basis(
    rng: &mut RngStream,
    d_input: usize,
    d_fourier: usize,
    sigma: f64,
    options: FourierOptions,
) -> Result<FourierLayer> {
    if d_fourier == 0 || d_fourier % 2 != 0 {
        return Err(contract(
            "init_gaussian_basis",
            format!("d_fourier {d_fourier} must be positive and even"),
        ));
    }
    if !(sigma >= 0.0) {
        return Err(contract("init_gaussian_basis", format!("sigma {sigma} < 0")));
    }
    let basis = gaussian_sample(rng, d_fourier / 2, d_input, sigma)?;
    FourierLayer::new(basis, options)
}

/// Axis-aligned basis `(I, cI, c²I, …, c^{k-1}I)ᵀ`.
pub fn init_loguniform_basis(
    d_input: usize,
    k: usize,
    c: f64,
    options: FourierOptions,
) -> Result<FourierLayer> {
    if k == 0 {
        return Err(contract("init_loguniform_basis", "k must be at least 1"));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(contract("init_loguniform_basis", format!("multiplier {c} outside (0, 1)")));
    }
    let basis = Matrix::from_fn(k * d_input, d_input, |r, col| {
        let block = r / d_input;
        if r % d_input == col {
            c.powi(block as i32)
        } else {
            0.0
        }
    });
    FourierLayer::new(basis, options)
}
