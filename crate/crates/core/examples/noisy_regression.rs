//! Regression onto Q* corrupted by Gaussian noise. A small-sigma Fourier
//! layer keeps the fit smooth; the equal-size MLP chases the noise.

use lff_lab::mdp::{generate_gridworld, noisy_target_experiment, q_iteration, FitConfig, StateEncoding, DEFAULT_TOL};
use lff_lab::nets::{NetSpec, OptimizerConfig};
use lff_lab::numerics::RngStream;

fn main() -> lff_lab::Result<()> {
    let gw = generate_gridworld(&mut RngStream::new(0), 12, 12, 0.25, 0.1)?;
    let qstar = q_iteration(&gw, DEFAULT_TOL, 100_000)?.q;
    let enc = StateEncoding::normalized_coords(&gw);
    let specs = [
        NetSpec {
            trainable: false,
            ..NetSpec::lff("lff", vec![32, 32], 32, 0.01)
        },
        NetSpec {
            match_params: Some("lff".into()),
            ..NetSpec::mlp("mlp", vec![32, 32, 32])
        },
    ];
    let fit = FitConfig {
        steps: 1000,
        optimizer: OptimizerConfig::adam(1e-3),
        batch_size: 10_000,
        eval_every: 250,
    };
    for r in noisy_target_experiment(&gw, &qstar, &enc, 3.0, &specs, &fit, &RngStream::new(1))? {
        println!(
            "{:>4} ({} params): clean MSE {:.3}, noisy MSE {:.3}",
            r.label, r.parameters, r.clean_mse, r.noisy_mse
        );
        for (step, clean, noisy) in r.curve {
            println!("      step {step:>5}: clean {clean:.3} noisy {noisy:.3}");
        }
    }
    Ok(())
}
