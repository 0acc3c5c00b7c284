use crate::error::{contract, Result};
use crate::nets::{init_gaussian_basis, AffineLayer, FourierOptions, Network};
use crate::numerics::{Matrix, RngStream};

/// Empirical tangent kernel `K_ij = ⟨∇_θ f(x_i), ∇_θ f(x_j)⟩` of a
/// scalar-output network over every trainable parameter.
///
/// Computed from per-layer Gram products rather than explicit per-sample
/// gradients: for an affine layer with prefactor `s`, inputs `H` and
/// pre-activation gradients `Δ`, its contribution is `s²(ΔΔᵀ)∘(HHᵀ)` plus
/// `ΔΔᵀ` for the bias.
pub fn empirical_ntk(net: &mut Network, xs: &Matrix) -> Result<Matrix> {
    if net.output_dim() != 1 {
        return Err(contract("empirical_ntk", format!("output dimension {} is not 1", net.output_dim())));
    }
    let n = xs.rows();
    net.forward(xs)?;
    let deltas = net.deltas(&Matrix::filled(n, 1, 1.0))?;
    let cache = net.cache().expect("forward just ran");
    let mut k = Matrix::zeros(n, n);
    for (i, layer) in net.layers.iter().enumerate() {
        let d = &deltas.pre_activations[i];
        let dd = d.matmul_transb(d)?;
        let hh = cache.layer_inputs[i].matmul_transb(&cache.layer_inputs[i])?;
        let s = layer.scale();
        k.add_assign_scaled(&dd.hadamard(&hh)?, s * s)?;
        if layer.bias.is_some() {
            k.add_assign_scaled(&dd, 1.0)?;
        }
    }
    if let (Some(f), Some(dp)) = (&net.fourier, &deltas.projection) {
        let c = f.frequency_scale();
        let pp = dp.matmul_transb(dp)?;
        let xx = xs.matmul_transb(xs)?;
        k.add_assign_scaled(&pp.hadamard(&xx)?, c * c)?;
    }
    // Gram sums are symmetric up to rounding; make it exact.
    let kt = k.transpose();
    Ok(k.add(&kt)?.scale(0.5))
}

/// Two-layer model `f(x) = √(2/m) Wᵀ[sin(Bx); cos(Bx)]` with `m` Fourier
/// features (`B` has `m/2` rows, `B ~ N(0, σ²)`, `W ~ N(0, 1)`), no bias,
/// no `2π`, no input concatenation, trainable `B`.
pub fn two_layer_fourier_model(rng: &mut RngStream, d_input: usize, width: usize, sigma: f64) -> Result<Network> {
    deep_fourier_model(rng, d_input, width, &[], sigma)
}

/// The two-layer model with ReLU hidden layers (NTK parameterization, no
/// bias) inserted between the Fourier embedding and the readout.
pub fn deep_fourier_model(
    rng: &mut RngStream,
    d_input: usize,
    width: usize,
    hidden: &[usize],
    sigma: f64,
) -> Result<Network> {
    let fourier = init_gaussian_basis(rng, d_input, width, sigma, FourierOptions::kernel_analysis())?;
    Network::new(Some(fourier), ntk_stack(rng, width, hidden))
}

/// Plain ReLU network in NTK parameterization without biases.
pub fn ntk_relu_model(rng: &mut RngStream, d_input: usize, hidden: &[usize]) -> Result<Network> {
    Network::new(None, ntk_stack(rng, d_input, hidden))
}

fn ntk_stack(rng: &mut RngStream, d_in: usize, hidden: &[usize]) -> Vec<AffineLayer> {
    let mut width = d_in;
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    for &h in hidden.iter().chain(std::iter::once(&1)) {
        layers.push(AffineLayer::ntk_normal(rng, width, h, false));
        width = h;
    }
    layers
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::NetSpec;
    use crate::numerics::{dot, gaussian_sample};

    /// Oracle: explicit per-sample gradient vectors from `backward` on a
    /// batch of one, then inner products.
    fn gradient_gram(net: &mut Network, xs: &Matrix) -> Matrix {
        let n = xs.rows();
        let mut grads = Vec::with_capacity(n);
        for i in 0..n {
            let x = xs.select_rows(&[i]);
            net.zero_grad();
            net.forward(&x).unwrap();
            net.backward(&Matrix::filled(1, 1, 1.0)).unwrap();
            let g: Vec<f64> = net.parameters_mut().iter().flat_map(|p| p.grad.to_vec()).collect();
            grads.push(g);
        }
        Matrix::from_fn(n, n, |i, j| dot(&grads[i], &grads[j]))
    }

    #[test]
    fn matches_explicit_gradient_inner_products() {
        let mut rng = RngStream::new(3);
        let xs = gaussian_sample(&mut rng, 7, 3, 1.0).unwrap();
        let specs = [
            NetSpec::lff("a", vec![9, 6], 10, 0.7),
            NetSpec {
                trainable: false,
                ..NetSpec::lff("b", vec![5], 8, 1.1)
            },
            NetSpec {
                ntk_parameterization: true,
                ..NetSpec::mlp("c", vec![8, 8])
            },
        ];
        for spec in specs {
            let mut net = spec.build(3, 1, &mut rng).unwrap();
            let fast = empirical_ntk(&mut net, &xs).unwrap();
            let slow = gradient_gram(&mut net, &xs);
            let err = fast.sub(&slow).unwrap().max_abs() / slow.max_abs();
            assert!(err < 1e-12, "{}: {err}", spec.label);
        }
        let mut two = two_layer_fourier_model(&mut rng, 3, 12, 0.9).unwrap();
        let fast = empirical_ntk(&mut two, &xs).unwrap();
        let slow = gradient_gram(&mut two, &xs);
        assert!(fast.sub(&slow).unwrap().max_abs() < 1e-12 * slow.max_abs());
    }

    #[test]
    fn diagonal_of_two_layer_model() {
        // With x on the sphere, the readout part of K(x, x) is exactly
        // (2/m)·Σ(sin² + cos²) = 1.
        let mut rng = RngStream::new(8);
        let mut net = two_layer_fourier_model(&mut rng, 2, 64, 2.0).unwrap();
        let mut frozen = net.clone();
        frozen.fourier.as_mut().unwrap().options.trainable = false;
        let xs = Matrix::from_rows(&[vec![0.6, 0.8], vec![1.0, 0.0]]).unwrap();
        let k = empirical_ntk(&mut frozen, &xs).unwrap();
        assert!((k[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((k[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(empirical_ntk(&mut net, &xs).unwrap()[(0, 0)] > 1.0);
    }

    #[test]
    fn rejects_vector_output() {
        let mut net = NetSpec::mlp("m", vec![3]).build(2, 2, &mut RngStream::new(0)).unwrap();
        assert!(empirical_ntk(&mut net, &Matrix::zeros(2, 2)).is_err());
    }
}
