use serde::{Deserialize, Serialize};

use super::dp::{argmax, normalized_return_with, q_iteration, Dynamics, TabularQ, DEFAULT_TOL};
use super::encoding::StateEncoding;
use super::grid::{GridWorld, ACTIONS, NUM_ACTIONS};
use crate::error::{contract, Result};
use crate::nets::{NetSpec, Network, Optimizer, OptimizerConfig};
use crate::numerics::{singular_values, Matrix, RngStream};

/// Smallest `k` whose top-`k` singular values hold a `1 - δ` fraction of
/// the total singular-value mass.
pub fn srank(features: &Matrix, delta: f64) -> Result<usize> {
    srank_from_singular_values(&singular_values(features)?, delta)
}

pub fn srank_from_singular_values(sv: &[f64], delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(contract("srank", format!("delta {delta} outside (0, 1)")));
    }
    let total: f64 = sv.iter().sum();
    if !(total > 0.0) {
        return Err(contract("srank", "feature matrix is zero"));
    }
    let mut acc = 0.0;
    for (k, s) in sv.iter().enumerate() {
        acc += s;
        if acc / total >= 1.0 - delta {
            return Ok(k + 1);
        }
    }
    Ok(sv.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum BufferSpec {
    /// Every `(state, action)` with its exact expected backup.
    Exhaustive,
    /// `size` transitions sampled once with uniform `(state, action)`.
    Sampled { size: usize },
    /// `per_pair` sampled transitions for every `(state, action)`.
    Covering { per_pair: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FqiConfig {
    pub iterations: usize,
    /// Gradient steps per iteration.
    pub grad_steps: usize,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub buffer: BufferSpec,
    pub srank_delta: f64,
}

impl Default for FqiConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            grad_steps: 200,
            optimizer: OptimizerConfig::adam(1e-3),
            batch_size: 256,
            buffer: BufferSpec::Exhaustive,
            srank_delta: 0.01,
        }
    }
}

/// One entry per completed iteration.
#[derive(Clone, Debug, Default, Serialize)]
pub struct FqiDiagnostics {
    pub mean_abs_q: Vec<f64>,
    pub mean_target: Vec<f64>,
    pub normalized_return: Vec<f64>,
    pub srank: Vec<usize>,
    pub sigma_max: Vec<f64>,
    pub sigma_min: Vec<f64>,
    /// Mean `|Q*|` over the same `(state, action)` pairs.
    pub mean_abs_q_star: f64,
    /// Iteration at which Q-values became non-finite, if they did.
    pub diverged_at: Option<usize>,
}

impl FqiDiagnostics {
    pub fn len(&self) -> usize {
        self.mean_abs_q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_abs_q.is_empty()
    }

    /// Largest `mean|Q_θ| / mean|Q*|` reached, infinite after divergence.
    pub fn peak_ratio(&self) -> f64 {
        if self.diverged_at.is_some() {
            return f64::INFINITY;
        }
        self.mean_abs_q.iter().fold(0.0f64, |m, &v| m.max(v)) / self.mean_abs_q_star
    }
}

#[derive(Clone, Debug)]
pub struct FqiRun {
    pub net: Network,
    pub diagnostics: FqiDiagnostics,
}

/// Regression rows: input state, targets for all actions, and which
/// actions carry loss.
struct Buffer {
    states: Vec<usize>,
    /// For sampled transitions: `(action, next_state, reward)` per row.
    transitions: Option<Vec<(usize, usize, f64)>>,
    mask: Matrix,
}

impl Buffer {
    fn new(gw: &GridWorld, spec: BufferSpec, rng: &mut RngStream) -> Result<Self> {
        let all = gw.states();
        match spec {
            BufferSpec::Exhaustive => Ok(Self {
                mask: Matrix::filled(all.len(), NUM_ACTIONS, 1.0),
                states: all,
                transitions: None,
            }),
            BufferSpec::Sampled { size } => {
                if size == 0 {
                    return Err(contract("fqi", "sampled buffer must be non-empty"));
                }
                let pairs = (0..size).map(|_| (all[rng.index(all.len())], rng.index(NUM_ACTIONS))).collect::<Vec<_>>();
                Ok(Self::from_pairs(gw, &pairs, rng))
            }
            BufferSpec::Covering { per_pair } => {
                if per_pair == 0 {
                    return Err(contract("fqi", "covering buffer needs per_pair >= 1"));
                }
                let mut pairs = Vec::with_capacity(all.len() * NUM_ACTIONS * per_pair);
                for &s in &all {
                    for a in 0..NUM_ACTIONS {
                        pairs.extend(std::iter::repeat((s, a)).take(per_pair));
                    }
                }
                Ok(Self::from_pairs(gw, &pairs, rng))
            }
        }
    }

    fn from_pairs(gw: &GridWorld, pairs: &[(usize, usize)], rng: &mut RngStream) -> Self {
        let mut states = Vec::with_capacity(pairs.len());
        let mut transitions = Vec::with_capacity(pairs.len());
        let mut mask = Matrix::zeros(pairs.len(), NUM_ACTIONS);
        for (row, &(s, a)) in pairs.iter().enumerate() {
            let (next, r) = gw.transition(s, ACTIONS[a], rng);
            states.push(s);
            transitions.push((a, next, r));
            mask[(row, a)] = 1.0;
        }
        Self {
            states,
            transitions: Some(transitions),
            mask,
        }
    }

    fn targets(&self, gw: &GridWorld, dynamics: &Dynamics, v: &[f64]) -> Matrix {
        match &self.transitions {
            None => Matrix::from_fn(self.states.len(), NUM_ACTIONS, |i, a| {
                dynamics.backup(self.states[i], a, gw.gamma, v)
            }),
            Some(tr) => Matrix::from_fn(self.states.len(), NUM_ACTIONS, |i, a| {
                let (ta, next, r) = tr[i];
                if a == ta {
                    r + gw.gamma * v[next]
                } else {
                    0.0
                }
            }),
        }
    }
}

fn masked_mean(values: &Matrix, mask: &Matrix, f: impl Fn(f64) -> f64) -> f64 {
    let (mut sum, mut count) = (0.0, 0.0);
    for (v, m) in values.as_slice().iter().zip(mask.as_slice()) {
        if *m != 0.0 {
            sum += f(*v);
            count += 1.0;
        }
    }
    sum / count
}

/// Greedy state values `max_a Q_θ(s, a)` for every cell (walls read 0).
fn network_values(gw: &GridWorld, net: &Network, enc: &StateEncoding) -> Result<(Matrix, Vec<f64>)> {
    let states = gw.states();
    let q = net.predict(&enc.batch(&states))?;
    let mut v = vec![0.0; gw.num_cells()];
    for (i, &s) in states.iter().enumerate() {
        v[s] = q.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    Ok((q, v))
}

/// Fitted Q-iteration: each iteration freezes bootstrapped targets
/// `r + γ max_a' Q_θ(s', a')` from the live network and takes
/// `grad_steps` optimizer steps on the masked squared error. Optimizer
/// state persists across iterations.
///
/// Non-finite Q-values stop the run; the diagnostics then cover the
/// iterations completed before the failure.
pub fn fqi(
    gw: &GridWorld,
    enc: &StateEncoding,
    spec: &NetSpec,
    config: &FqiConfig,
    rng: &mut RngStream,
) -> Result<FqiRun> {
    if config.batch_size == 0 {
        return Err(contract("fqi", "batch size must be positive"));
    }
    let optimum = q_iteration(gw, DEFAULT_TOL, 1_000_000)?;
    let v_star_start = optimum.v[gw.start()];
    let dynamics = Dynamics::new(gw);
    let mut net = spec.build(enc.dim(), NUM_ACTIONS, rng)?;
    let buffer = Buffer::new(gw, config.buffer, rng)?;
    let xs = enc.batch(&buffer.states);
    let all_states = gw.states();
    let feature_inputs = enc.batch(&all_states);
    let q_star = optimum.q.values.select_rows(&buffer.states);
    let mut diag = FqiDiagnostics {
        mean_abs_q_star: masked_mean(&q_star, &buffer.mask, f64::abs),
        ..FqiDiagnostics::default()
    };
    let mut opt = Optimizer::new(&config.optimizer);
    let mut order: Vec<usize> = (0..buffer.states.len()).collect();
    let mut cursor = order.len();
    let n = order.len();
    let batch = config.batch_size.min(n);
    for iter in 0..config.iterations {
        let (_, v) = network_values(gw, &net, enc)?;
        if v.iter().any(|x| !x.is_finite()) {
            diag.diverged_at = Some(iter);
            break;
        }
        let targets = buffer.targets(gw, &dynamics, &v);
        let mut finite = true;
        for _ in 0..config.grad_steps {
            if cursor + batch > n {
                rng.shuffle(&mut order);
                cursor = 0;
            }
            let idx = &order[cursor..cursor + batch];
            cursor += batch;
            let bx = xs.select_rows(idx);
            let by = targets.select_rows(idx);
            let bm = buffer.mask.select_rows(idx);
            net.zero_grad();
            let pred = net.forward(&bx)?;
            let count: f64 = bm.as_slice().iter().sum();
            let grad = Matrix::from_fn(pred.rows(), pred.cols(), |r, c| {
                bm[(r, c)] * 2.0 * (pred[(r, c)] - by[(r, c)]) / count
            });
            if !grad.is_finite() {
                finite = false;
                break;
            }
            net.backward(&grad)?;
            opt.apply(&mut net);
        }
        let q = net.predict(&xs)?;
        if !finite || !q.is_finite() {
            diag.diverged_at = Some(iter);
            break;
        }
        diag.mean_abs_q.push(masked_mean(&q, &buffer.mask, f64::abs));
        diag.mean_target.push(masked_mean(&targets, &buffer.mask, |t| t));
        let (q_all, _) = network_values(gw, &net, enc)?;
        let mut policy = vec![0; gw.num_cells()];
        for (i, &s) in all_states.iter().enumerate() {
            policy[s] = argmax(q_all.row(i));
        }
        diag.normalized_return.push(normalized_return_with(gw, &policy, v_star_start)?);
        let phi = net.penultimate_features(&feature_inputs)?;
        let sv = singular_values(&phi)?;
        diag.sigma_max.push(sv.first().copied().unwrap_or(0.0));
        diag.sigma_min.push(sv.last().copied().unwrap_or(0.0));
        diag.srank.push(srank_from_singular_values(&sv, config.srank_delta).unwrap_or(0));
    }
    Ok(FqiRun { net, diagnostics: diag })
}

/// FQI with a one-hot linear function class fit exactly on the exhaustive
/// buffer: least squares with one-hot features returns the targets
/// themselves, so each iteration is one exact backup.
pub fn fqi_tabular(gw: &GridWorld, iterations: usize) -> TabularQ {
    let dynamics = Dynamics::new(gw);
    let states = gw.states();
    let mut q = TabularQ {
        values: Matrix::zeros(gw.num_cells(), NUM_ACTIONS),
    };
    for _ in 0..iterations {
        let mut v = vec![0.0; gw.num_cells()];
        for &s in &states {
            v[s] = q.value(s);
        }
        for &s in &states {
            for a in 0..NUM_ACTIONS {
                q.values.row_mut(s)[a] = dynamics.backup(s, a, gw.gamma, &v);
            }
        }
    }
    q
}
