use std::f64::consts::PI;

use crate::error::{contract, Result};
use crate::numerics::{dot, norm, Matrix, RngStream};

const UNIT_TOL: f64 = 1e-9;

/// The two summands of the two-layer Fourier feature tangent kernel: the
/// readout-weight part `exp(-σ²‖x-x'‖²/2)` and the basis part
/// `xᵀx' · exp(-σ²‖x-x'‖²/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParts {
    pub weight: f64,
    pub basis: f64,
}

impl KernelParts {
    pub fn total(&self) -> f64 {
        self.weight + self.basis
    }
}

fn check_unit(op: &'static str, x: &[f64]) -> Result<()> {
    let n = norm(x);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(contract(op, format!("input norm {n} is not 1")));
    }
    Ok(())
}

/// Split of the infinite-width kernel into readout and basis contributions.
pub fn lff_kernel_parts(x: &[f64], x2: &[f64], sigma: f64) -> Result<KernelParts> {
    if x.len() != x2.len() {
        return Err(contract("analytic_lff_kernel", "inputs differ in dimension"));
    }
    check_unit("analytic_lff_kernel", x)?;
    check_unit("analytic_lff_kernel", x2)?;
    let dist_sq: f64 = x.iter().zip(x2).map(|(a, b)| (a - b).powi(2)).sum();
    let weight = (-0.5 * sigma * sigma * dist_sq).exp();
    Ok(KernelParts {
        weight,
        basis: dot(x, x2) * weight,
    })
}

/// Infinite-width tangent kernel of `f(x) = √(2/m) Wᵀ[sin(Bx); cos(Bx)]`
/// with `W ~ N(0,1)`, `B ~ N(0,σ²)`, for unit-norm inputs:
/// `(2 - ‖x-x'‖²/2) · exp(-σ²‖x-x'‖²/2)`.
pub fn analytic_lff_kernel(x: &[f64], x2: &[f64], sigma: f64) -> Result<f64> {
    let parts = lff_kernel_parts(x, x2, sigma)?;
    let dist_sq: f64 = x.iter().zip(x2).map(|(a, b)| (a - b).powi(2)).sum();
    let closed = (2.0 - 0.5 * dist_sq) * parts.weight;
    debug_assert!((closed - parts.total()).abs() < 1e-9 * closed.abs().max(1.0));
    Ok(closed)
}

/// Same kernel as a function of the angle between two points on the sphere:
/// `(1 + cos θ) · exp(σ²(cos θ - 1))`.
pub fn analytic_lff_kernel_angle(theta: f64, sigma: f64) -> f64 {
    let c = theta.cos();
    (1.0 + c) * (sigma * sigma * (c - 1.0)).exp()
}

/// Monte-Carlo vs closed form for `E[cos(bᵀt)] = exp(-σ²‖t‖²/2)`,
/// `b ~ N(0, σ²I)`.
pub fn cosine_expectation_check(sigma: f64, t: &[f64], samples: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(contract("cosine_expectation_check", "need at least one sample"));
    }
    if !(sigma >= 0.0) {
        return Err(contract("cosine_expectation_check", format!("sigma {sigma} < 0")));
    }
    let mut sum = 0.0;
    for _ in 0..samples {
        let proj: f64 = t.iter().map(|&ti| ti * sigma * rng.normal()).sum();
        sum += proj.cos();
    }
    let analytic = (-0.5 * sigma * sigma * dot(t, t)).exp();
    Ok((sum / samples as f64, analytic))
}

/// `n` points evenly spaced on the unit circle, angle `2πj/n` for point `j`.
#[derive(Clone, Debug)]
pub struct CircleDataset {
    pub points: Matrix,
}

impl CircleDataset {
    pub fn new(n: usize) -> Self {
        let points = Matrix::from_fn(n, 2, |j, c| {
            let angle = 2.0 * PI * j as f64 / n as f64;
            if c == 0 {
                angle.cos()
            } else {
                angle.sin()
            }
        });
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.len() as f64
    }

    /// Offsets `θ_j - θ_0` wrapped into `(-π, π]`.
    pub fn offsets(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| {
                let a = self.angle(j);
                if a > PI {
                    a - 2.0 * PI
                } else {
                    a
                }
            })
            .collect()
    }

    /// `cos(kθ_j)` for every point.
    pub fn cosine(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|j| (k as f64 * self.angle(j)).cos()).collect()
    }
}

/// `n` i.i.d. uniform points on `S^{d-1}` (normalized Gaussians).
pub fn sphere_sample(n: usize, d: usize, rng: &mut RngStream) -> Matrix {
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        let row = m.row_mut(i);
        loop {
            row.iter_mut().for_each(|v| *v = rng.normal());
            let r = norm(row);
            if r > 1e-12 {
                row.iter_mut().for_each(|v| *v /= r);
                break;
            }
        }
    }
    m
}

/// Kernel matrix `K_ij = k(x_i, x_j)` for the closed-form two-layer kernel.
pub fn analytic_kernel_matrix(points: &Matrix, sigma: f64) -> Result<Matrix> {
    let n = points.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = analytic_lff_kernel(points.row(i), points.row(j), sigma)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        let x = [1.0, 0.0];
        for sigma in [0.1, 1.0, 7.0] {
            assert_eq!(analytic_lff_kernel(&x, &x, sigma).unwrap(), 2.0);
            assert!(analytic_lff_kernel(&x, &[-1.0, 0.0], sigma).unwrap().abs() < 1e-15);
        }
        let v = analytic_lff_kernel(&x, &[0.0, 1.0], 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn angle_form_agrees() {
        for &theta in &[0.0, 0.3, 1.0, 2.5, PI] {
            let x2 = [theta.cos(), theta.sin()];
            let a = analytic_lff_kernel(&[1.0, 0.0], &x2, 1.7).unwrap();
            assert!((a - analytic_lff_kernel_angle(theta, 1.7)).abs() < 1e-14);
            let p = lff_kernel_parts(&[1.0, 0.0], &x2, 1.7).unwrap();
            assert!((p.total() - a).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_off_sphere_inputs() {
        assert!(analytic_lff_kernel(&[1.0, 0.1], &[1.0, 0.0], 1.0).is_err());
        assert!(analytic_lff_kernel(&[1.0, 0.0], &[1.0, 0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn cosine_expectation_degenerate_cases() {
        let mut rng = RngStream::new(0);
        assert_eq!(cosine_expectation_check(1.0, &[0.0, 0.0], 10, &mut rng).unwrap(), (1.0, 1.0));
        assert_eq!(cosine_expectation_check(0.0, &[0.3, 2.0], 10, &mut rng).unwrap(), (1.0, 1.0));
        assert!(cosine_expectation_check(1.0, &[1.0], 0, &mut rng).is_err());
    }

    #[test]
    fn circle_points_are_unit_and_uniform() {
        let ds = CircleDataset::new(64);
        for j in 0..64 {
            assert!((norm(ds.points.row(j)) - 1.0).abs() < 1e-12);
        }
        let k = analytic_kernel_matrix(&ds.points, 1.3).unwrap();
        // Shift invariance: K_ij depends only on (j - i) mod n.
        for i in 0..64 {
            for j in 0..64 {
                assert!((k[(i, j)] - k[(0, (j + 64 - i) % 64)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sphere_samples_are_unit() {
        let m = sphere_sample(20, 5, &mut RngStream::new(1));
        for i in 0..20 {
            assert!((norm(m.row(i)) - 1.0).abs() < 1e-12);
        }
    }
}
