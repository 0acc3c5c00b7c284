use serde::Serialize;

use crate::error::{contract, mismatch, Result};
use crate::numerics::{dot, Matrix};

const RHO_TOL: f64 = 1e-9;

/// Per-state margins of the two sufficient conditions for the kernel-driven
/// Bellman update to contract. A condition holds when its margin is `>= 0`.
#[derive(Clone, Debug, Serialize)]
pub struct ContractionRow {
    pub index: usize,
    /// `1 - α K_ii ρ_i`, must be positive.
    pub step_margin: f64,
    /// `(1 - γ) K_ii ρ_i - (1 + γ) Σ_{j≠i} |K_ij| ρ_j`, must be non-negative.
    pub dominance_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    pub step_condition: bool,
    pub dominance_condition: bool,
}

impl ContractionReport {
    pub fn holds(&self) -> bool {
        self.step_condition && self.dominance_condition
    }

    pub fn worst_dominance_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.dominance_margin).fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates both conditions for every state under sampling distribution
/// `rho`, step size `alpha` and discount `gamma`.
pub fn contraction_check(k: &Matrix, rho: &[f64], alpha: f64, gamma: f64) -> Result<ContractionReport> {
    let n = k.rows();
    if !k.is_square() || rho.len() != n {
        return Err(mismatch(
            "contraction_check",
            format!("kernel {:?} with distribution of length {}", k.shape(), rho.len()),
        ));
    }
    if rho.iter().any(|&p| !(p >= 0.0)) {
        return Err(contract("contraction_check", "distribution has a negative or NaN entry"));
    }
    let total: f64 = rho.iter().sum();
    if (total - 1.0).abs() > RHO_TOL {
        return Err(contract("contraction_check", format!("distribution sums to {total}")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(contract("contraction_check", format!("discount {gamma} outside [0, 1)")));
    }
    if !(alpha > 0.0) {
        return Err(contract("contraction_check", format!("step size {alpha} must be positive")));
    }
    let rows: Vec<ContractionRow> = (0..n)
        .map(|i| {
            let own = k[(i, i)] * rho[i];
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| k[(i, j)].abs() * rho[j]).sum();
            ContractionRow {
                index: i,
                step_margin: 1.0 - alpha * own,
                dominance_margin: (1.0 - gamma) * own - (1.0 + gamma) * off,
            }
        })
        .collect();
    Ok(ContractionReport {
        step_condition: rows.iter().all(|r| r.step_margin > 0.0),
        dominance_condition: rows.iter().all(|r| r.dominance_margin >= 0.0),
        rows,
    })
}

/// Smallest `σ²` guaranteeing the dominance condition for the two-layer
/// Fourier kernel with uniform `ρ` over `N + 1` states whose pairwise
/// cosines are all below `1 - δ`:
/// `σ² ≥ (1/δ) ln[N(1+γ)(2-δ) / (2(1-γ))]`.
pub fn sigma_contraction_bound(n: usize, gamma: f64, delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(contract("sigma_contraction_bound", format!("discount {gamma} outside [0, 1)")));
    }
    if !(delta > 0.0 && delta <= 2.0) {
        return Err(contract("sigma_contraction_bound", format!("separation {delta} outside (0, 2]")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let arg = n as f64 * (1.0 + gamma) * (2.0 - delta) / (2.0 * (1.0 - gamma));
    Ok((arg.ln() / delta).max(0.0))
}

/// `δ = 1 - max_{i≠j} x_iᵀx_j` for unit-norm rows.
pub fn min_separation(points: &Matrix) -> f64 {
    let n = points.rows();
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(dot(points.row(i), points.row(j)));
        }
    }
    1.0 - best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_spot_value() {
        let s = sigma_contraction_bound(100, 0.99, 0.1).unwrap();
        assert!((s - 98.47).abs() < 0.01, "{s}");
    }

    #[test]
    fn identity_kernel_contracts() {
        let k = Matrix::identity(4);
        let r = contraction_check(&k, &[0.25; 4], 1.0, 0.9).unwrap();
        assert!(r.holds());
        assert!(r.rows.iter().all(|row| (row.dominance_margin - 0.025).abs() < 1e-15));
    }

    #[test]
    fn constant_kernel_fails_dominance() {
        let k = Matrix::filled(3, 3, 1.0);
        let r = contraction_check(&k, &[1.0 / 3.0; 3], 1.0, 0.5).unwrap();
        assert!(r.step_condition);
        assert!(!r.dominance_condition);
    }

    #[test]
    fn rejects_bad_distribution() {
        let k = Matrix::identity(2);
        assert!(contraction_check(&k, &[0.5, 0.6], 1.0, 0.9).is_err());
        assert!(contraction_check(&k, &[1.5, -0.5], 1.0, 0.9).is_err());
        assert!(contraction_check(&k, &[1.0], 1.0, 0.9).is_err());
        assert!(contraction_check(&k, &[0.5, 0.5], 1.0, 1.0).is_err());
    }
}
