use serde::{Deserialize, Serialize};

use super::dp::TabularQ;
use super::encoding::StateEncoding;
use super::grid::{Cell, GridWorld, NUM_ACTIONS};
use crate::error::{contract, Result};
use crate::nets::{fit_regression_with, mse_loss, resolve_matches, NetSpec, Network, OptimizerConfig};
use crate::numerics::{Matrix, RngStream};

/// Regression schedule shared by the gridworld experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub steps: usize,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    /// Record errors every this many steps (0 disables the curve).
    pub eval_every: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            optimizer: OptimizerConfig::adam(1e-3),
            batch_size: 256,
            eval_every: 100,
        }
    }
}

/// Inputs and `Q*` targets over every non-wall state.
pub fn q_dataset(gw: &GridWorld, qstar: &TabularQ, enc: &StateEncoding) -> (Vec<usize>, Matrix, Matrix) {
    let states = gw.states();
    let xs = enc.batch(&states);
    let ys = qstar.values.select_rows(&states);
    (states, xs, ys)
}

#[derive(Clone, Debug)]
pub struct SupervisedFit {
    pub net: Network,
    pub clean_mse: f64,
    /// `(step, mse)` samples taken every `eval_every` steps.
    pub curve: Vec<(usize, f64)>,
    /// `max_a Q_θ(s, a)` laid out as the grid; walls hold `NaN`.
    pub v_map: Matrix,
}

fn v_map(gw: &GridWorld, net: &Network, enc: &StateEncoding) -> Result<Matrix> {
    let all: Vec<usize> = (0..gw.num_cells()).collect();
    let q = net.predict(&enc.batch(&all))?;
    Ok(Matrix::from_fn(gw.height, gw.width, |r, c| {
        let s = r * gw.width + c;
        if gw.cell(s) == Cell::Wall {
            f64::NAN
        } else {
            q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    }))
}

/// Regresses a fresh network built from `spec` onto `Q*` over all
/// `(state, action)` pairs.
pub fn supervised_qfit(
    gw: &GridWorld,
    qstar: &TabularQ,
    enc: &StateEncoding,
    spec: &NetSpec,
    fit: &FitConfig,
    rng: &mut RngStream,
) -> Result<SupervisedFit> {
    let (_, xs, ys) = q_dataset(gw, qstar, enc);
    let mut net = spec.build(enc.dim(), NUM_ACTIONS, rng)?;
    let mut curve = Vec::new();
    fit_regression_with(&mut net, &xs, &ys, fit.steps, &fit.optimizer, fit.batch_size, rng, |step, n, _| {
        if fit.eval_every > 0 && (step + 1) % fit.eval_every == 0 {
            if let Ok(p) = n.predict(&xs) {
                curve.push((step + 1, mse_loss(&p, &ys).map_or(f64::NAN, |l| l.0)));
            }
        }
    })?;
    let clean_mse = mse_loss(&net.predict(&xs)?, &ys)?.0;
    let v_map = v_map(gw, &net, enc)?;
    Ok(SupervisedFit {
        net,
        clean_mse,
        curve,
        v_map,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NoisyFit {
    pub label: String,
    pub parameters: usize,
    /// Error against the uncorrupted `Q*`.
    pub clean_mse: f64,
    /// Error against the noisy targets the net was trained on.
    pub noisy_mse: f64,
    /// `(step, clean_mse, noisy_mse)`.
    pub curve: Vec<(usize, f64, f64)>,
}

/// Trains each net on `Q* + N(0, noise_std²)` (noise drawn once and shared)
/// and reports errors against both the clean and the noisy targets.
///
/// Every net gets the same initialization/batching stream index, so nets
/// differ only in architecture.
pub fn noisy_target_experiment(
    gw: &GridWorld,
    qstar: &TabularQ,
    enc: &StateEncoding,
    noise_std: f64,
    specs: &[NetSpec],
    fit: &FitConfig,
    rng: &RngStream,
) -> Result<Vec<NoisyFit>> {
    if !(noise_std >= 0.0) {
        return Err(contract("noisy_target_experiment", format!("noise std {noise_std} < 0")));
    }
    let (_, xs, clean) = q_dataset(gw, qstar, enc);
    let mut noise_rng = rng.substream(1);
    let noisy = Matrix::from_fn(clean.rows(), clean.cols(), |r, c| {
        clean[(r, c)] + if noise_std > 0.0 { noise_std * noise_rng.normal() } else { 0.0 }
    });
    let specs = resolve_matches(specs, enc.dim(), NUM_ACTIONS)?;
    specs
        .iter()
        .map(|spec| {
            let mut net_rng = rng.substream(2);
            let mut net = spec.build(enc.dim(), NUM_ACTIONS, &mut net_rng)?;
            let mut curve = Vec::new();
            fit_regression_with(
                &mut net,
                &xs,
                &noisy,
                fit.steps,
                &fit.optimizer,
                fit.batch_size,
                &mut net_rng,
                |step, n, _| {
                    if fit.eval_every > 0 && (step + 1) % fit.eval_every == 0 {
                        if let Ok(p) = n.predict(&xs) {
                            let c = mse_loss(&p, &clean).map_or(f64::NAN, |l| l.0);
                            let z = mse_loss(&p, &noisy).map_or(f64::NAN, |l| l.0);
                            curve.push((step + 1, c, z));
                        }
                    }
                },
            )?;
            let pred = net.predict(&xs)?;
            Ok(NoisyFit {
                label: spec.label.clone(),
                parameters: net.parameter_count(),
                clean_mse: mse_loss(&pred, &clean)?.0,
                noisy_mse: mse_loss(&pred, &noisy)?.0,
                curve,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{q_iteration, DEFAULT_TOL};

    fn small_world() -> (GridWorld, TabularQ) {
        let gw = GridWorld::from_rows(&["S..L", ".#..", "...G", "L..."], 0.2, 0.9).unwrap();
        let q = q_iteration(&gw, DEFAULT_TOL, 10_000).unwrap().q;
        (gw, q)
    }

    #[test]
    fn capable_net_fits_small_grid() {
        let (gw, q) = small_world();
        let scale = q.values.max_abs();
        let scaled = TabularQ {
            values: q.values.scale(1.0 / scale),
        };
        let enc = StateEncoding::normalized_coords(&gw);
        let fit = FitConfig {
            steps: 3000,
            optimizer: OptimizerConfig::adam(3e-3),
            batch_size: 1000,
            eval_every: 0,
        };
        let spec = NetSpec::lff("lff", vec![64, 64], 64, 1.0);
        let out = supervised_qfit(&gw, &scaled, &enc, &spec, &fit, &mut RngStream::new(0)).unwrap();
        assert!(out.clean_mse < 1e-3, "{}", out.clean_mse);
        assert!(out.v_map[(1, 1)].is_nan());
        assert_eq!(out.v_map.shape(), (4, 4));
    }

    #[test]
    fn noiseless_targets_give_identical_errors() {
        let (gw, q) = small_world();
        let enc = StateEncoding::normalized_coords(&gw);
        let fit = FitConfig {
            steps: 50,
            ..FitConfig::default()
        };
        let specs = [NetSpec::mlp("mlp", vec![16]), NetSpec::lff("lff", vec![16], 16, 0.1)];
        let out = noisy_target_experiment(&gw, &q, &enc, 0.0, &specs, &fit, &RngStream::new(1)).unwrap();
        for r in &out {
            assert_eq!(r.clean_mse.to_bits(), r.noisy_mse.to_bits());
        }
    }

    #[test]
    fn zero_q_is_fit_to_near_zero() {
        let (gw, q) = small_world();
        let zero = TabularQ {
            values: Matrix::zeros(q.values.rows(), NUM_ACTIONS),
        };
        let enc = StateEncoding::normalized_coords(&gw);
        let fit = FitConfig {
            steps: 1500,
            optimizer: OptimizerConfig::Sgd { lr: 0.1 },
            batch_size: 1000,
            eval_every: 0,
        };
        let out = supervised_qfit(&gw, &zero, &enc, &NetSpec::mlp("m", vec![16]), &fit, &mut RngStream::new(2)).unwrap();
        assert!(out.clean_mse < 1e-3, "{}", out.clean_mse);
    }
}
