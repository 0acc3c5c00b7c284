//! Fitted Q-iteration with a neural Q-function on a small grid, printing
//! the per-iteration diagnostics.

use lff_lab::mdp::{fqi, generate_gridworld, BufferSpec, EncodingMode, FqiConfig, StateEncoding};
use lff_lab::nets::{NetSpec, OptimizerConfig};
use lff_lab::numerics::RngStream;

fn main() -> lff_lab::Result<()> {
    let mut gw = generate_gridworld(&mut RngStream::new(2), 8, 8, 0.2, 0.1)?;
    gw.gamma = 0.95;
    let enc = StateEncoding::new(&gw, EncodingMode::SmoothRandom { dim: 16, length_scale: 2.0 }, &mut RngStream::new(3))?;
    let cfg = FqiConfig {
        iterations: 15,
        grad_steps: 100,
        optimizer: OptimizerConfig::adam(1e-3),
        batch_size: 128,
        buffer: BufferSpec::Covering { per_pair: 2 },
        srank_delta: 0.01,
    };
    for spec in [NetSpec::lff("lff", vec![32, 32], 32, 0.01), NetSpec::mlp("mlp", vec![32, 32])] {
        let run = fqi(&gw, &enc, &spec, &cfg, &mut RngStream::new(4))?;
        let d = &run.diagnostics;
        println!("{} (mean |Q*| = {:.3})", spec.label, d.mean_abs_q_star);
        for i in (0..d.len()).step_by(3) {
            println!(
                "  iter {:>2}: mean|Q| {:>7.3}  target {:>7.3}  return {:>6.3}  srank {:>3}  s_max {:>8.2}",
                i + 1,
                d.mean_abs_q[i],
                d.mean_target[i],
                d.normalized_return[i],
                d.srank[i],
                d.sigma_max[i]
            );
        }
        println!("  peak mean|Q| / mean|Q*| = {:.2}", d.peak_ratio());
    }
    Ok(())
}
