use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::error::{contract, mismatch, Error, Result};
use crate::numerics::{Matrix, RngStream};

/// Mean squared error over every entry and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(mismatch(
            "mse_loss",
            format!("{:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    let count = pred.as_slice().len() as f64;
    let diff = pred.sub(target)?;
    let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / count;
    Ok((loss, diff.scale(2.0 / count)))
}

/// Plain gradient descent on every trainable tensor.
pub fn sgd_step(net: &mut Network, lr: f64) {
    for p in net.parameters_mut() {
        for (v, g) in p.value.iter_mut().zip(p.grad.iter()) {
            *v -= lr * *g;
        }
    }
}

/// Moments and hyperparameters of Adam.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Moment buffers, one per trainable tensor, lazily sized on first step.
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.first, &self.second)
    }
}

/// Bias-corrected Adam update. Gradients are left untouched.
pub fn adam_step(net: &mut Network, state: &mut AdamState) {
    let params = net.parameters_mut();
    if state.first.len() != params.len() {
        state.first = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        state.second = state.first.clone();
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (k, p) in params.into_iter().enumerate() {
        let m = &mut state.first[k];
        let v = &mut state.second[k];
        for i in 0..p.value.len() {
            let g = p.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p.value[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
}

/// Optimizer choice as it appears in experiment configs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

/// Optimizer with persistent state, so several training phases (e.g. FQI
/// iterations) can share Adam moments.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam(AdamState),
}

impl Optimizer {
    pub fn new(config: &OptimizerConfig) -> Self {
        match *config {
            OptimizerConfig::Sgd { lr } => Optimizer::Sgd { lr },
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => Optimizer::Adam(AdamState::new(lr, beta1, beta2, eps)),
        }
    }

    pub fn apply(&mut self, net: &mut Network) {
        match self {
            Optimizer::Sgd { lr } => sgd_step(net, *lr),
            Optimizer::Adam(state) => adam_step(net, state),
        }
    }

    /// One full step on a batch: forward, MSE, backward, update. Returns the
    /// batch loss measured before the update.
    pub fn train_step(&mut self, net: &mut Network, xs: &Matrix, ys: &Matrix) -> Result<f64> {
        net.zero_grad();
        let pred = net.forward(xs)?;
        let (loss, grad) = mse_loss(&pred, ys)?;
        net.backward(&grad)?;
        self.apply(net);
        Ok(loss)
    }
}

/// Mini-batch regression on `(xs, ys)` with shuffled epochs.
///
/// Returns the mean training loss of every step. `batch_size >= n` means
/// full-batch training. Fails with [`Error::Diverged`] on a non-finite loss.
pub fn fit_regression(
    net: &mut Network,
    xs: &Matrix,
    ys: &Matrix,
    steps: usize,
    optimizer: &OptimizerConfig,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    fit_regression_with(net, xs, ys, steps, optimizer, batch_size, rng, |_, _, _| {})
}

/// [`fit_regression`] with a hook called after every step as
/// `(step, network, loss)`.
#[allow(clippy::too_many_arguments)]
pub fn fit_regression_with(
    net: &mut Network,
    xs: &Matrix,
    ys: &Matrix,
    steps: usize,
    optimizer: &OptimizerConfig,
    batch_size: usize,
    rng: &mut RngStream,
    mut on_step: impl FnMut(usize, &Network, f64),
) -> Result<Vec<f64>> {
    let mut opt = Optimizer::new(optimizer);
    let mut sampler = BatchSampler::new(xs, ys, batch_size)?;
    let mut curve = Vec::with_capacity(steps);
    for step in 0..steps {
        let (bx, by) = sampler.next(xs, ys, rng);
        let loss = match (bx, by) {
            (Some(bx), Some(by)) => opt.train_step(net, &bx, &by)?,
            _ => opt.train_step(net, xs, ys)?,
        };
        if !loss.is_finite() {
            return Err(Error::Diverged { step });
        }
        curve.push(loss);
        on_step(step, net, loss);
    }
    Ok(curve)
}

/// Shuffled-epoch mini-batch index stream.
pub struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
}

impl BatchSampler {
    pub fn new(xs: &Matrix, ys: &Matrix, batch_size: usize) -> Result<Self> {
        if xs.rows() == 0 {
            return Err(contract("fit_regression", "empty dataset"));
        }
        if xs.rows() != ys.rows() {
            return Err(mismatch(
                "fit_regression",
                format!("{} inputs vs {} targets", xs.rows(), ys.rows()),
            ));
        }
        if batch_size == 0 {
            return Err(contract("fit_regression", "batch size must be positive"));
        }
        Ok(Self {
            order: (0..xs.rows()).collect(),
            cursor: xs.rows(),
            batch_size,
        })
    }

    /// `(None, None)` stands for the full batch.
    pub fn next(&mut self, xs: &Matrix, ys: &Matrix, rng: &mut RngStream) -> (Option<Matrix>, Option<Matrix>) {
        let n = self.order.len();
        if self.batch_size >= n {
            return (None, None);
        }
        if self.cursor + self.batch_size > n {
            rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        let idx = &self.order[self.cursor..self.cursor + self.batch_size];
        self.cursor += self.batch_size;
        (Some(xs.select_rows(idx)), Some(ys.select_rows(idx)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::network::AffineLayer;

    fn scalar_net(w: f64) -> Network {
        let layer = AffineLayer::from_parts(Matrix::from_rows(&[[w]]).unwrap(), None, false).unwrap();
        Network::new(None, vec![layer]).unwrap()
    }

    /// Loss (x·w - 1)² at x = 1, i.e. the scalar quadratic (w - 1)².
    fn quad_step(net: &mut Network) -> f64 {
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        let y = Matrix::from_rows(&[[1.0]]).unwrap();
        net.zero_grad();
        let pred = net.forward(&x).unwrap();
        let (loss, g) = mse_loss(&pred, &y).unwrap();
        net.backward(&g).unwrap();
        loss
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = scalar_net(1.0);
        quad_step(&mut net);
        sgd_step(&mut net, 0.3);
        assert_eq!(net.layers[0].weights[(0, 0)], 1.0);
        let mut st = AdamState::new(0.1, 0.9, 0.999, 1e-8);
        adam_step(&mut net, &mut st);
        assert_eq!(net.layers[0].weights[(0, 0)], 1.0);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn sgd_below_stability_limit_decreases_monotonically() {
        // Curvature of (w-1)² is 2, so any lr < 1 is stable.
        let mut net = scalar_net(-3.0);
        let mut prev = f64::INFINITY;
        for _ in 0..15 {
            let loss = quad_step(&mut net);
            assert!(loss < prev);
            prev = loss;
            sgd_step(&mut net, 0.4);
        }
    }

    #[test]
    fn adam_reaches_scalar_minimum() {
        let mut net = scalar_net(-3.0);
        let mut st = AdamState::new(1e-2, 0.9, 0.999, 1e-8);
        let mut reached = None;
        for step in 0..2000 {
            quad_step(&mut net);
            adam_step(&mut net, &mut st);
            if (net.layers[0].weights[(0, 0)] - 1.0).abs() < 1e-3 {
                reached = Some(step);
                break;
            }
        }
        assert!(reached.is_some(), "w = {}", net.layers[0].weights[(0, 0)]);
    }

    #[test]
    fn linear_regression_to_zero_loss() {
        let xs = Matrix::from_fn(20, 1, |i, _| i as f64 / 10.0 - 1.0);
        let ys = xs.map(|x| 3.0 * x - 0.5);
        let layer = AffineLayer::from_parts(Matrix::zeros(1, 1), Some(vec![0.0]), false).unwrap();
        let mut net = Network::new(None, vec![layer]).unwrap();
        let curve = fit_regression(&mut net, &xs, &ys, 2000, &OptimizerConfig::Sgd { lr: 0.2 }, 64, &mut RngStream::new(0))
            .unwrap();
        assert!(*curve.last().unwrap() < 1e-8);
    }

    #[test]
    fn zero_targets_zero_head_zero_loss() {
        let mut rng = RngStream::new(3);
        let hidden = AffineLayer::he_uniform(&mut rng, 2, 8, true);
        let head = AffineLayer::from_parts(Matrix::zeros(1, 8), Some(vec![0.0]), false).unwrap();
        let mut net = Network::new(None, vec![hidden, head]).unwrap();
        let xs = Matrix::from_fn(10, 2, |i, j| (i + j) as f64 * 0.1);
        let ys = Matrix::zeros(10, 1);
        let curve = fit_regression(&mut net, &xs, &ys, 20, &OptimizerConfig::adam(1e-2), 4, &mut rng).unwrap();
        assert!(curve.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut net = scalar_net(0.0);
        let r = fit_regression(
            &mut net,
            &Matrix::zeros(0, 1),
            &Matrix::zeros(0, 1),
            1,
            &OptimizerConfig::Sgd { lr: 0.1 },
            1,
            &mut RngStream::new(0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut rng = RngStream::new(8);
            let l1 = AffineLayer::he_uniform(&mut rng, 2, 6, true);
            let l2 = AffineLayer::he_uniform(&mut rng, 6, 1, true);
            let mut net = Network::new(None, vec![l1, l2]).unwrap();
            let xs = Matrix::from_fn(30, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0);
            let ys = Matrix::from_fn(30, 1, |i, _| (i as f64).sin());
            fit_regression(&mut net, &xs, &ys, 100, &OptimizerConfig::adam(1e-2), 8, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }
}
