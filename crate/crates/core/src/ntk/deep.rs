use std::f64::consts::PI;

use super::kernel::{lff_kernel_parts, CircleDataset};
use super::spectrum::{kernel_spectrum, KernelSpectrum};
use crate::error::{contract, Result};
use crate::numerics::{dot, Matrix};

/// Infinite-width tangent kernel of a ReLU network in NTK parameterization
/// (`√(2/fan_in)` prefactors, no biases) with `depth` affine layers.
///
/// With `use_lff_base` the layers sit on top of the two-layer Fourier
/// embedding, whose readout and basis parts seed the recursion
/// (`Σ¹ = kᵂ`, `Θ¹ = kᵂ + kᴮ`). Otherwise the first layer acts on the raw
/// input: `Σ¹ = Θ¹ = (2/d)xᵀx'`. `depth = 1` is the bare embedding
/// kernel. Each further layer applies
///
/// ```text
/// Σ' = √(Σ_xx Σ_x'x')/π · (sin θ + (π - θ) cos θ)
/// Θ' = Σ' + (π - θ)/π · Θ
/// ```
pub fn deep_ntk_kernel(depth: usize, sigma: f64, xs: &Matrix, use_lff_base: bool) -> Result<Matrix> {
    if depth == 0 {
        return Err(contract("deep_ntk", "depth must be at least 1"));
    }
    let n = xs.rows();
    let d = xs.cols() as f64;
    let base = |i: usize, j: usize| -> Result<(f64, f64)> {
        if use_lff_base {
            let p = lff_kernel_parts(xs.row(i), xs.row(j), sigma)?;
            Ok((p.weight, p.total()))
        } else {
            let s = 2.0 / d * dot(xs.row(i), xs.row(j));
            Ok((s, s))
        }
    };
    let diag: Vec<f64> = (0..n).map(|i| base(i, i).map(|b| b.0)).collect::<Result<_>>()?;
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (mut sigma_ij, mut theta_ij) = base(i, j)?;
            // Σ(x, x) is preserved by every ReLU layer, so the diagonal
            // entries stay at their base values.
            let norm = (diag[i] * diag[j]).sqrt();
            for _ in 1..depth {
                let (s, dot_s) = relu_expectations(sigma_ij, norm);
                sigma_ij = s;
                theta_ij = s + dot_s * theta_ij;
            }
            k[(i, j)] = theta_ij;
            k[(j, i)] = theta_ij;
        }
    }
    Ok(k)
}

/// `(2E[relu(u)relu(v)], 2E[relu'(u)relu'(v)])` for centred Gaussians with
/// covariance `c` and `√(Var u · Var v) = norm`.
fn relu_expectations(c: f64, norm: f64) -> (f64, f64) {
    if norm == 0.0 {
        return (0.0, 0.5);
    }
    let rho = (c / norm).clamp(-1.0, 1.0);
    let theta = rho.acos();
    let s = norm / PI * (theta.sin() + (PI - theta) * rho);
    (s, (PI - theta) / PI)
}

/// Spectrum of [`deep_ntk_kernel`] on the circle dataset.
pub fn deep_ntk(depth: usize, sigma: f64, points: &CircleDataset, use_lff_base: bool) -> Result<KernelSpectrum> {
    kernel_spectrum(&deep_ntk_kernel(depth, sigma, &points.points, use_lff_base)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntk::{analytic_kernel_matrix, empirical_ntk, ntk_relu_model};
    use crate::numerics::RngStream;

    #[test]
    fn depth_one_is_the_two_layer_kernel() {
        let ds = CircleDataset::new(16);
        let a = deep_ntk_kernel(1, 2.3, &ds.points, true).unwrap();
        let b = analytic_kernel_matrix(&ds.points, 2.3).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn relu_expectations_closed_forms() {
        // θ = 0: Σ' = Σ, Σ̇ = 1.  θ = π/2: Σ' = norm/π, Σ̇ = 1/2.  θ = π: 0, 0.
        let (s, d) = relu_expectations(2.0, 2.0);
        assert!((s - 2.0).abs() < 1e-15 && (d - 1.0).abs() < 1e-15);
        let (s, d) = relu_expectations(0.0, 3.0);
        assert!((s - 3.0 / PI).abs() < 1e-15 && (d - 0.5).abs() < 1e-15);
        let (s, d) = relu_expectations(-1.0, 1.0);
        assert!(s.abs() < 1e-15 && d.abs() < 1e-15);
    }

    #[test]
    fn relu_expectations_match_quadrature() {
        // 2E[relu(u)relu(v)] and 2E[1{u>0}1{v>0}] by 2-D midpoint quadrature
        // for unit variances and correlation ρ.
        for rho in [-0.7, 0.0, 0.4, 0.95] {
            let (s, d) = relu_expectations(rho, 1.0);
            let h = 0.02;
            let (mut qs, mut qd) = (0.0, 0.0);
            let steps = (8.0 / h) as i64;
            for a in -steps..steps {
                for b in -steps..steps {
                    let (z1, z2) = ((a as f64 + 0.5) * h, (b as f64 + 0.5) * h);
                    let w = (-0.5 * (z1 * z1 + z2 * z2)).exp() / (2.0 * PI) * h * h;
                    let u = z1;
                    let v = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
                    if u > 0.0 && v > 0.0 {
                        qs += 2.0 * u * v * w;
                        qd += 2.0 * w;
                    }
                }
            }
            assert!((s - qs).abs() < 2e-3, "rho {rho}: {s} vs {qs}");
            assert!((d - qd).abs() < 2e-3, "rho {rho}: {d} vs {qd}");
        }
    }

    #[test]
    fn wide_relu_network_approaches_vanilla_kernel() {
        let ds = CircleDataset::new(8);
        let analytic = deep_ntk_kernel(3, 0.0, &ds.points, false).unwrap();
        let mut net = ntk_relu_model(&mut RngStream::new(12), 2, &[2048, 2048]).unwrap();
        let emp = empirical_ntk(&mut net, &ds.points).unwrap();
        let rel = emp.sub(&analytic).unwrap().max_abs() / analytic.max_abs();
        assert!(rel < 0.15, "relative deviation {rel}");
    }

    #[test]
    fn zero_depth_is_rejected() {
        assert!(deep_ntk_kernel(0, 1.0, &CircleDataset::new(4).points, true).is_err());
    }
}
