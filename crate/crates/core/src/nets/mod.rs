//! Finite-width networks: an optional Fourier feature layer followed by an
//! affine/ReLU stack, with exact reverse-mode gradients.
//!
//! Batches are matrices with one sample per row. The loss convention is the
//! mean (not sum) of squared errors over every output entry.

mod checkpoint;
mod fourier;
mod network;
mod optim;
mod spec;

pub use checkpoint::{Checkpoint, LayerMeta, NamedArray, CHECKPOINT_FORMAT};
pub use fourier::{init_gaussian_basis, init_loguniform_basis, FourierLayer, FourierOptions};
pub use network::{AffineLayer, Network, ParamMut};
pub use optim::{
    adam_step, fit_regression, fit_regression_with, mse_loss, sgd_step, AdamState, BatchSampler, Optimizer,
    OptimizerConfig,
};
pub use spec::{resolve_matches, BasisInit, NetKind, NetSpec};

/// `lff_embed` on a single input.
pub fn lff_embed(layer: &FourierLayer, x: &[f64]) -> crate::Result<Vec<f64>> {
    layer.embed(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_sample, Matrix, RngStream};

    #[test]
    fn linear_net_gradient_is_closed_form() {
        // Single linear unit, no bias: ∇_w mean((Xw - y)²) = 2Xᵀ(Xw - y)/n.
        let mut rng = RngStream::new(6);
        let x = gaussian_sample(&mut rng, 9, 4, 1.0).unwrap();
        let y = gaussian_sample(&mut rng, 9, 1, 1.0).unwrap();
        let w = gaussian_sample(&mut rng, 1, 4, 1.0).unwrap();
        let mut net = Network::new(None, vec![AffineLayer::from_parts(w.clone(), None, false).unwrap()]).unwrap();
        let pred = net.forward(&x).unwrap();
        let (_, g) = mse_loss(&pred, &y).unwrap();
        net.backward(&g).unwrap();
        let resid = x.matmul(&w.transpose()).unwrap().sub(&y).unwrap();
        let expected = x.matmul_transa(&resid).unwrap().scale(2.0 / 9.0);
        for j in 0..4 {
            assert!((net.layers[0].grad_weights()[(0, j)] - expected[(j, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_loss_gradient_gives_zero_gradients() {
        let mut rng = RngStream::new(2);
        let mut net = NetSpec::lff("l", vec![5, 5], 6, 1.0).build(2, 3, &mut rng).unwrap();
        let x = gaussian_sample(&mut rng, 4, 2, 1.0).unwrap();
        net.forward(&x).unwrap();
        net.backward(&Matrix::zeros(4, 3)).unwrap();
        for p in net.parameters_mut() {
            assert!(p.grad.iter().all(|&g| g == 0.0), "{}", p.name);
        }
    }

    #[test]
    fn frozen_basis_is_untouched_by_training() {
        let mut rng = RngStream::new(4);
        let spec = NetSpec {
            trainable: false,
            ..NetSpec::lff("frozen", vec![8], 8, 1.0)
        };
        let mut net = spec.build(2, 1, &mut rng).unwrap();
        let before = net.fourier.as_ref().unwrap().basis.clone();
        let xs = gaussian_sample(&mut rng, 16, 2, 1.0).unwrap();
        let ys = gaussian_sample(&mut rng, 16, 1, 1.0).unwrap();
        fit_regression(&mut net, &xs, &ys, 50, &OptimizerConfig::adam(1e-2), 4, &mut rng).unwrap();
        assert_eq!(net.fourier.as_ref().unwrap().basis, before);
        assert!(net.parameters_mut().iter().all(|p| p.name != "fourier.basis"));
    }

    #[test]
    fn sin_cos_block_has_unit_pair_norm() {
        let mut rng = RngStream::new(12);
        let layer = init_gaussian_basis(&mut rng, 3, 40, 2.0, FourierOptions::default()).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let e = lff_embed(&layer, &x).unwrap();
            let sq: f64 = e[..40].iter().map(|v| v * v).sum();
            assert!((sq - 20.0).abs() < 1e-12);
        }
    }
}
