use serde::Serialize;

use super::empirical::empirical_ntk;
use super::kernel::CircleDataset;
use super::spectrum::frequency_magnitudes;
use crate::error::{contract, mismatch, Error, Result};
use crate::nets::{mse_loss, sgd_step, Network};
use crate::numerics::{dot, jacobi_eig, Matrix};

const PSD_TOL: f64 = 1e-8;

/// Residual `f_t - y` under the linearized flow `df/dt = -ηK(f - y)`.
#[derive(Clone, Debug, Serialize)]
pub struct FlowResidual {
    pub times: Vec<f64>,
    /// `residuals[t]` is the residual vector at `times[t]`.
    pub residuals: Vec<Vec<f64>>,
    /// Same residuals expressed in the eigenbasis of `K`.
    pub eigen_components: Vec<Vec<f64>>,
    /// Eigenvalues of `K`, descending, aligned with `eigen_components`.
    pub eigenvalues: Vec<f64>,
}

/// Closed-form residual `e^{-ηKt}(f₀ - y)` via the eigendecomposition of `K`.
///
/// Eigenvalues down to `-1e-8·max(1, λ_max)` are treated as rounding and
/// clamped to zero; anything more negative is an error.
pub fn flow_residual(k: &Matrix, f0: &[f64], y: &[f64], eta: f64, times: &[f64]) -> Result<FlowResidual> {
    let n = k.rows();
    if f0.len() != n || y.len() != n {
        return Err(mismatch(
            "flow_residual",
            format!("kernel is {n}x{n}, f0 has {}, y has {}", f0.len(), y.len()),
        ));
    }
    if !(eta > 0.0) {
        return Err(contract("flow_residual", format!("learning rate {eta} must be positive")));
    }
    let eig = jacobi_eig(k)?;
    let floor = -PSD_TOL * eig.eigenvalues.first().copied().unwrap_or(0.0).max(1.0);
    if let Some(&low) = eig.eigenvalues.last() {
        if low < floor {
            return Err(Error::NotPsd { eigenvalue: low });
        }
    }
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let r0: Vec<f64> = f0.iter().zip(y).map(|(a, b)| a - b).collect();
    let v = &eig.eigenvectors;
    let coords: Vec<f64> = (0..n).map(|c| dot(&v.col_vec(c), &r0)).collect();
    let mut residuals = Vec::with_capacity(times.len());
    let mut eigen_components = Vec::with_capacity(times.len());
    for &t in times {
        let comp: Vec<f64> = coords
            .iter()
            .zip(&eigenvalues)
            .map(|(c, l)| c * (-eta * l * t).exp())
            .collect();
        residuals.push(v.matvec(&comp)?);
        eigen_components.push(comp);
    }
    Ok(FlowResidual {
        times: times.to_vec(),
        residuals,
        eigen_components,
        eigenvalues,
    })
}

/// Fixed-step RK4 integration of `dr/dt = -ηKr`, reporting at `times`
/// (which must be non-decreasing).
pub fn integrate_residual_rk4(k: &Matrix, r0: &[f64], eta: f64, times: &[f64], dt: f64) -> Result<Vec<Vec<f64>>> {
    if r0.len() != k.rows() {
        return Err(mismatch("integrate_residual_rk4", "residual length differs from kernel size"));
    }
    if !(dt > 0.0) {
        return Err(contract("integrate_residual_rk4", "step must be positive"));
    }
    let rhs = |r: &[f64]| -> Result<Vec<f64>> { Ok(k.matvec(r)?.into_iter().map(|v| -eta * v).collect()) };
    let axpy = |r: &[f64], a: f64, d: &[f64]| -> Vec<f64> { r.iter().zip(d).map(|(x, y)| x + a * y).collect() };
    let mut r = r0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(contract("integrate_residual_rk4", "times must be non-decreasing"));
        }
        while t < target {
            let h = dt.min(target - t);
            let k1 = rhs(&r)?;
            let k2 = rhs(&axpy(&r, 0.5 * h, &k1))?;
            let k3 = rhs(&axpy(&r, 0.5 * h, &k2))?;
            let k4 = rhs(&axpy(&r, h, &k3))?;
            for i in 0..r.len() {
                r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        out.push(r.clone());
    }
    Ok(out)
}

/// Per-frequency outcome of [`lazy_training_check`].
#[derive(Clone, Debug, Serialize)]
pub struct FrequencyFit {
    pub frequency: usize,
    /// Rayleigh quotient of the initial empirical kernel on the mode.
    pub kernel_eigenvalue: f64,
    /// Steps for the frequency's residual to halve under the linearized
    /// model with the same step size.
    pub predicted_half_life: f64,
    /// First step at which the trained network's residual at this
    /// frequency halved, if it did.
    pub observed_half_life: Option<usize>,
    /// Residual magnitude at this frequency after each step (index 0 is
    /// the initial value).
    pub residual: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LazyTrainingReport {
    pub fits: Vec<FrequencyFit>,
    /// Whether ordering frequencies by predicted half-life gives the same
    /// order as the observed half-lives (never-halved counts as slowest).
    pub order_matches: bool,
}

/// Trains a copy of `net` on `cos(kθ)` for each `k` with full-batch SGD on
/// the mean squared error and compares per-frequency convergence with the
/// kernel prediction.
///
/// The network output is centred on its initial value, so the residual
/// starts as the pure target mode.
pub fn lazy_training_check(
    net: &Network,
    points: &CircleDataset,
    frequencies: &[usize],
    steps: usize,
    lr: f64,
) -> Result<LazyTrainingReport> {
    let n = points.len();
    let xs = &points.points;
    let mut probe = net.clone();
    let k = empirical_ntk(&mut probe, xs)?;
    let f_init = net.predict(xs)?;
    let mut fits = Vec::with_capacity(frequencies.len());
    for &freq in frequencies {
        if freq > n / 2 {
            return Err(contract("lazy_training_check", format!("frequency {freq} exceeds n/2 = {}", n / 2)));
        }
        let target = points.cosine(freq);
        let norm_sq = dot(&target, &target);
        let kernel_eigenvalue = dot(&target, &k.matvec(&target)?) / norm_sq;
        // One SGD step on mean((f - y)²) multiplies the mode by 1 - 2ηλ/n.
        let contraction = 1.0 - 2.0 * lr * kernel_eigenvalue / n as f64;
        let predicted_half_life = if contraction <= 0.0 {
            0.0
        } else if contraction >= 1.0 {
            f64::INFINITY
        } else {
            0.5f64.ln() / contraction.ln()
        };
        let y = Matrix::column(&target);
        let mut model = net.clone();
        let mut residual = Vec::with_capacity(steps + 1);
        let mut observed = None;
        for step in 0..=steps {
            let out = model.forward(xs)?.sub(&f_init)?;
            let (loss, grad) = mse_loss(&out, &y)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { step });
            }
            let diff: Vec<f64> = out.as_slice().iter().zip(&target).map(|(a, b)| a - b).collect();
            let mag = frequency_magnitudes(&diff)[freq];
            if observed.is_none() && step > 0 && mag <= 0.5 * residual[0] {
                observed = Some(step);
            }
            residual.push(mag);
            if step < steps {
                model.zero_grad();
                model.backward(&grad)?;
                sgd_step(&mut model, lr);
            }
        }
        fits.push(FrequencyFit {
            frequency: freq,
            kernel_eigenvalue,
            predicted_half_life,
            observed_half_life: observed,
            residual,
        });
    }
    let order_matches = same_order(&fits);
    Ok(LazyTrainingReport { fits, order_matches })
}

fn same_order(fits: &[FrequencyFit]) -> bool {
    let observed = |f: &FrequencyFit| f.observed_half_life.map_or(f64::INFINITY, |s| s as f64);
    for a in fits {
        for b in fits {
            if a.predicted_half_life < b.predicted_half_life && observed(a) > observed(b) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntk::{analytic_kernel_matrix, two_layer_fourier_model};
    use crate::numerics::RngStream;

    #[test]
    fn time_zero_is_initial_residual() {
        let k = analytic_kernel_matrix(&CircleDataset::new(6).points, 1.0).unwrap();
        let f0 = [0.5, -1.0, 0.0, 2.0, 0.3, 0.1];
        let y = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let r = flow_residual(&k, &f0, &y, 0.3, &[0.0]).unwrap();
        for i in 0..6 {
            assert!((r.residuals[0][i] - (f0[i] - y[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_kernel_keeps_residual() {
        let r = flow_residual(&Matrix::zeros(3, 3), &[1.0, 2.0, 3.0], &[0.0; 3], 1.0, &[5.0]).unwrap();
        assert_eq!(r.residuals[0], vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_indefinite_kernel() {
        let k = Matrix::from_diag(&[1.0, -0.5]);
        assert!(matches!(
            flow_residual(&k, &[1.0, 1.0], &[0.0, 0.0], 1.0, &[1.0]),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn rk4_tracks_scalar_exponential() {
        let k = Matrix::from_diag(&[2.0]);
        let r = integrate_residual_rk4(&k, &[1.0], 0.5, &[0.0, 1.0, 3.0], 0.01).unwrap();
        assert_eq!(r[0], vec![1.0]);
        assert!((r[1][0] - (-1.0f64).exp()).abs() < 1e-10);
        assert!((r[2][0] - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn lazy_training_with_zero_steps_and_low_frequency_first() {
        let ds = CircleDataset::new(32);
        let mut rng = RngStream::new(2);
        let net = two_layer_fourier_model(&mut rng, 2, 512, 0.1).unwrap();
        let report = lazy_training_check(&net, &ds, &[1, 8], 200, 0.5).unwrap();
        let f1 = &report.fits[0];
        let f8 = &report.fits[1];
        assert!(f1.observed_half_life.is_some());
        assert!(f8.observed_half_life.is_none());
        assert!(report.order_matches);
        // Centred output: the initial residual is exactly the target mode.
        assert!((f1.residual[0] - 4.0).abs() < 1e-9);
    }
}
