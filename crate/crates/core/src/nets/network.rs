use crate::error::{contract, mismatch, Result};
use crate::numerics::{gaussian_sample, Matrix, RngStream};

use super::fourier::FourierLayer;

/// Affine map `z = s · W h + b` with `W` stored as `out x in`.
///
/// `s` is `√(2 / fan_in)` under the NTK parameterization and `1` otherwise.
#[derive(Clone, Debug)]
pub struct AffineLayer {
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
    pub ntk_parameterization: bool,
    pub(crate) grad_weights: Matrix,
    pub(crate) grad_bias: Option<Vec<f64>>,
}

impl AffineLayer {
    pub fn from_parts(weights: Matrix, bias: Option<Vec<f64>>, ntk_parameterization: bool) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != weights.rows() {
                return Err(mismatch(
                    "AffineLayer::from_parts",
                    format!("bias of length {} for {} outputs", b.len(), weights.rows()),
                ));
            }
        }
        let grad_weights = Matrix::zeros(weights.rows(), weights.cols());
        let grad_bias = bias.as_ref().map(|b| vec![0.0; b.len()]);
        Ok(Self {
            weights,
            bias,
            ntk_parameterization,
            grad_weights,
            grad_bias,
        })
    }

    /// He-uniform weights `U(-√(6/in), √(6/in))`, zero bias.
    pub fn he_uniform(rng: &mut RngStream, fan_in: usize, fan_out: usize, with_bias: bool) -> Self {
        let limit = (6.0 / fan_in as f64).sqrt();
        let weights = Matrix::from_fn(fan_out, fan_in, |_, _| rng.uniform_range(-limit, limit));
        let bias = with_bias.then(|| vec![0.0; fan_out]);
        Self::from_parts(weights, bias, false).expect("consistent shapes")
    }

    /// `N(0, 1)` weights under the NTK parameterization, zero bias.
    pub fn ntk_normal(rng: &mut RngStream, fan_in: usize, fan_out: usize, with_bias: bool) -> Self {
        let weights = gaussian_sample(rng, fan_out, fan_in, 1.0).expect("unit stddev");
        let bias = with_bias.then(|| vec![0.0; fan_out]);
        Self::from_parts(weights, bias, true).expect("consistent shapes")
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn scale(&self) -> f64 {
        if self.ntk_parameterization {
            (2.0 / self.fan_in() as f64).sqrt()
        } else {
            1.0
        }
    }

    pub fn grad_weights(&self) -> &Matrix {
        &self.grad_weights
    }

    pub fn grad_bias(&self) -> Option<&[f64]> {
        self.grad_bias.as_deref()
    }

    fn apply(&self, h: &Matrix) -> Result<Matrix> {
        let mut z = h.matmul_transb(&self.weights)?;
        let s = self.scale();
        if s != 1.0 {
            z.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        }
        if let Some(b) = &self.bias {
            for i in 0..z.rows() {
                for (v, bj) in z.row_mut(i).iter_mut().zip(b) {
                    *v += bj;
                }
            }
        }
        Ok(z)
    }
}

/// Values kept from the last forward pass.
#[derive(Clone, Debug)]
pub(crate) struct ForwardCache {
    pub input: Matrix,
    /// `c · X Bᵀ` when a Fourier layer is present.
    pub projection: Option<Matrix>,
    /// Input to each affine layer.
    pub layer_inputs: Vec<Matrix>,
    /// Pre-activation of each affine layer.
    pub pre_activations: Vec<Matrix>,
}

/// Gradients of some scalar w.r.t. every pre-activation, one row per sample.
#[derive(Clone, Debug)]
pub(crate) struct Deltas {
    /// Indexed like `Network::layers`.
    pub pre_activations: Vec<Matrix>,
    /// W.r.t. the Fourier projection `c·Bx`, when a Fourier layer exists.
    pub projection: Option<Matrix>,
}

/// Optional Fourier layer followed by affine layers with ReLU in between.
#[derive(Clone, Debug)]
pub struct Network {
    pub fourier: Option<FourierLayer>,
    pub layers: Vec<AffineLayer>,
    cache: Option<ForwardCache>,
}

/// One trainable tensor together with its gradient accumulator.
pub struct ParamMut<'a> {
    pub name: String,
    pub value: &'a mut [f64],
    pub grad: &'a mut [f64],
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

impl Network {
    pub fn new(fourier: Option<FourierLayer>, layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(contract("Network::new", "at least one affine layer is required"));
        }
        let mut width = match &fourier {
            Some(f) => f.output_dim(),
            None => layers[0].fan_in(),
        };
        for (i, l) in layers.iter().enumerate() {
            if l.fan_in() != width {
                return Err(mismatch(
                    "Network::new",
                    format!("layer {i} expects {} inputs, previous width is {width}", l.fan_in()),
                ));
            }
            width = l.fan_out();
        }
        Ok(Self {
            fourier,
            layers,
            cache: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        match &self.fourier {
            Some(f) => f.d_input(),
            None => self.layers[0].fan_in(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").fan_out()
    }

    pub fn parameter_count(&self) -> usize {
        let fourier = self
            .fourier
            .as_ref()
            .map_or(0, |f| f.basis.rows() * f.basis.cols());
        fourier
            + self
                .layers
                .iter()
                .map(|l| l.weights.rows() * l.weights.cols() + l.bias.as_ref().map_or(0, Vec::len))
                .sum::<usize>()
    }

    fn run(&self, x: &Matrix) -> Result<ForwardCache> {
        if x.cols() != self.input_dim() {
            return Err(mismatch(
                "forward",
                format!("batch with {} columns, network input is {}", x.cols(), self.input_dim()),
            ));
        }
        let (projection, mut h) = match &self.fourier {
            Some(f) => {
                let p = f.project(x)?;
                let e = f.embed_projected(x, &p);
                (Some(p), e)
            }
            None => (None, x.clone()),
        };
        let last = self.layers.len() - 1;
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&h)?;
            let next = if i < last { z.map(relu) } else { z.clone() };
            layer_inputs.push(std::mem::replace(&mut h, next));
            pre_activations.push(z);
        }
        Ok(ForwardCache {
            input: x.clone(),
            projection,
            layer_inputs,
            pre_activations,
        })
    }

    /// Batched forward pass (rows are samples). Caches activations for
    /// [`Network::backward`].
    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let cache = self.run(x)?;
        let out = cache.pre_activations.last().expect("non-empty").clone();
        self.cache = Some(cache);
        Ok(out)
    }

    /// Forward pass without touching the cache; usable through `&self`.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let cache = self.run(x)?;
        Ok(cache.pre_activations.into_iter().last().expect("non-empty"))
    }

    /// Activations feeding the final affine layer (the learned features).
    pub fn penultimate_features(&self, x: &Matrix) -> Result<Matrix> {
        let cache = self.run(x)?;
        Ok(cache.layer_inputs.into_iter().last().expect("non-empty"))
    }

    pub(crate) fn cache(&self) -> Option<&ForwardCache> {
        self.cache.as_ref()
    }

    /// Per-sample pre-activation gradients for the cached batch.
    ///
    /// ReLU'(0) is taken to be 0.
    pub(crate) fn deltas(&self, loss_grad: &Matrix) -> Result<Deltas> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| contract("backward", "called before forward"))?;
        let out = cache.pre_activations.last().expect("non-empty");
        if loss_grad.shape() != out.shape() {
            return Err(mismatch(
                "backward",
                format!("loss gradient {:?} for output {:?}", loss_grad.shape(), out.shape()),
            ));
        }
        let n_layers = self.layers.len();
        let mut deltas = vec![Matrix::zeros(0, 0); n_layers];
        let mut dz = loss_grad.clone();
        for i in (0..n_layers).rev() {
            let layer = &self.layers[i];
            // dL/dh for this layer's input.
            let needs_input_grad = i > 0 || self.fourier.as_ref().is_some_and(|f| f.options.trainable);
            let dh = if needs_input_grad {
                Some(dz.matmul(&layer.weights)?.scale(layer.scale()))
            } else {
                None
            };
            deltas[i] = dz;
            match dh {
                Some(dh) if i > 0 => {
                    let z_prev = &cache.pre_activations[i - 1];
                    dz = dh.hadamard(&z_prev.map(|v| if v > 0.0 { 1.0 } else { 0.0 }))?;
                }
                Some(dh) => {
                    dz = dh;
                }
                None => {
                    dz = Matrix::zeros(0, 0);
                }
            }
        }
        let projection = match (&self.fourier, &cache.projection) {
            (Some(f), Some(p)) if f.options.trainable => {
                let half = f.basis.rows();
                let de = &dz;
                Some(Matrix::from_fn(p.rows(), half, |r, j| {
                    de[(r, j)] * p[(r, j)].cos() - de[(r, j + half)] * p[(r, j)].sin()
                }))
            }
            _ => None,
        };
        Ok(Deltas {
            pre_activations: deltas,
            projection,
        })
    }

    /// Reverse-mode pass for the cached batch; gradients are added to the
    /// accumulators (call [`Network::zero_grad`] between steps).
    pub fn backward(&mut self, loss_grad: &Matrix) -> Result<()> {
        let deltas = self.deltas(loss_grad)?;
        let cache = self.cache.as_ref().expect("checked in deltas");
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let dz = &deltas.pre_activations[i];
            let gw = dz.matmul_transa(&cache.layer_inputs[i])?;
            layer.grad_weights.add_assign_scaled(&gw, layer.scale())?;
            if let Some(gb) = layer.grad_bias.as_mut() {
                for r in 0..dz.rows() {
                    for (g, d) in gb.iter_mut().zip(dz.row(r)) {
                        *g += d;
                    }
                }
            }
        }
        if let (Some(f), Some(dp)) = (self.fourier.as_mut(), deltas.projection.as_ref()) {
            let gb = dp.matmul_transa(&cache.input)?;
            let c = f.frequency_scale();
            f.grad.add_assign_scaled(&gb, c)?;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            l.grad_weights.fill(0.0);
            if let Some(g) = l.grad_bias.as_mut() {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        if let Some(f) = self.fourier.as_mut() {
            f.grad.fill(0.0);
        }
    }

    /// Trainable tensors in canonical order: Fourier basis (when trainable),
    /// then for each affine layer its weights followed by its bias.
    pub fn parameters_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::new();
        if let Some(f) = self.fourier.as_mut() {
            if f.options.trainable {
                out.push(ParamMut {
                    name: "fourier.basis".into(),
                    value: f.basis.as_mut_slice(),
                    grad: f.grad.as_mut_slice(),
                });
            }
        }
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push(ParamMut {
                name: format!("affine.{i}.weight"),
                value: l.weights.as_mut_slice(),
                grad: l.grad_weights.as_mut_slice(),
            });
            if let (Some(b), Some(g)) = (l.bias.as_mut(), l.grad_bias.as_mut()) {
                out.push(ParamMut {
                    name: format!("affine.{i}.bias"),
                    value: b.as_mut_slice(),
                    grad: g.as_mut_slice(),
                });
            }
        }
        out
    }

    pub fn basis_stddev(&self) -> Option<f64> {
        self.fourier.as_ref().map(FourierLayer::basis_stddev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::fourier::{init_gaussian_basis, FourierOptions};

    #[test]
    fn zero_weights_propagate_bias() {
        let l1 = AffineLayer::from_parts(Matrix::zeros(4, 3), Some(vec![0.5, -1.0, 2.0, 0.0]), false).unwrap();
        let l2 = AffineLayer::from_parts(Matrix::zeros(2, 4), Some(vec![0.25, -3.0]), false).unwrap();
        let net = Network::new(None, vec![l1, l2]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.0, 4.0]]).unwrap();
        let y = net.predict(&x).unwrap();
        assert_eq!(y, Matrix::from_rows(&[[0.25, -3.0], [0.25, -3.0]]).unwrap());
    }

    #[test]
    fn single_affine_is_matmul_plus_bias() {
        let w = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0], [0.0, 1.0]]).unwrap();
        let layer = AffineLayer::from_parts(w.clone(), Some(vec![1.0, 2.0, 3.0]), false).unwrap();
        let net = Network::new(None, vec![layer]).unwrap();
        let x = Matrix::from_rows(&[[0.3, 0.7]]).unwrap();
        let y = net.predict(&x).unwrap();
        let expected = x.matmul(&w.transpose()).unwrap();
        for j in 0..3 {
            assert!((y[(0, j)] - expected[(0, j)] - (j as f64 + 1.0)).abs() < 1e-15);
        }
    }

    /// Unbatched scalar evaluation written independently of `run`.
    fn scalar_reference(net: &Network, x: &[f64]) -> Vec<f64> {
        let mut h: Vec<f64> = match &net.fourier {
            Some(f) => f.embed(x).unwrap(),
            None => x.to_vec(),
        };
        for (li, l) in net.layers.iter().enumerate() {
            let mut z = Vec::new();
            for o in 0..l.fan_out() {
                let mut s = 0.0;
                for k in 0..l.fan_in() {
                    s += l.weights[(o, k)] * h[k];
                }
                s *= l.scale();
                if let Some(b) = &l.bias {
                    s += b[o];
                }
                z.push(s);
            }
            h = if li + 1 < net.layers.len() { z.into_iter().map(|v| v.max(0.0)).collect() } else { z };
        }
        h
    }

    #[test]
    fn batched_forward_matches_scalar_reference() {
        let mut rng = RngStream::new(21);
        let fourier = init_gaussian_basis(&mut rng, 3, 8, 0.7, FourierOptions::default()).unwrap();
        let l1 = AffineLayer::he_uniform(&mut rng, 11, 16, true);
        let l2 = AffineLayer::ntk_normal(&mut rng, 16, 2, true);
        let net = Network::new(Some(fourier), vec![l1, l2]).unwrap();
        let x = gaussian_sample(&mut rng, 7, 3, 1.0).unwrap();
        let y = net.predict(&x).unwrap();
        for i in 0..7 {
            let r = scalar_reference(&net, x.row(i));
            for j in 0..2 {
                assert!((y[(i, j)] - r[j]).abs() < 1e-12);
            }
        }
        // Plain two-layer ReLU net too.
        let net = Network::new(
            None,
            vec![AffineLayer::he_uniform(&mut rng, 3, 9, true), AffineLayer::he_uniform(&mut rng, 9, 1, true)],
        )
        .unwrap();
        let y = net.predict(&x).unwrap();
        for i in 0..7 {
            assert!((y[(i, 0)] - scalar_reference(&net, x.row(i))[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_requires_forward() {
        let mut net = Network::new(None, vec![AffineLayer::he_uniform(&mut RngStream::new(0), 2, 1, true)]).unwrap();
        assert!(net.backward(&Matrix::zeros(1, 1)).is_err());
        net.forward(&Matrix::zeros(3, 2)).unwrap();
        assert!(net.backward(&Matrix::zeros(2, 1)).is_err());
        assert!(net.backward(&Matrix::zeros(3, 1)).is_ok());
    }

    #[test]
    fn shape_mismatches_rejected() {
        let mut rng = RngStream::new(0);
        let a = AffineLayer::he_uniform(&mut rng, 2, 3, true);
        let b = AffineLayer::he_uniform(&mut rng, 4, 1, true);
        assert!(Network::new(None, vec![a.clone(), b]).is_err());
        let net = Network::new(None, vec![a]).unwrap();
        assert!(net.predict(&Matrix::zeros(1, 5)).is_err());
    }
}
