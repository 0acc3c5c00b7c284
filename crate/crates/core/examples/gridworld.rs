//! Random gridworld, optimal Q-values by Q-iteration, and the value of the
//! greedy policy.

use lff_lab::mdp::{bellman_residual, generate_gridworld, normalized_return, q_iteration, DEFAULT_TOL};
use lff_lab::numerics::RngStream;

fn main() -> lff_lab::Result<()> {
    let gw = generate_gridworld(&mut RngStream::new(4), 12, 12, 0.25, 0.1)?;
    println!("{}", gw.to_text());
    let sol = q_iteration(&gw, DEFAULT_TOL, 100_000)?;
    println!("converged in {} sweeps, Bellman residual {:.2e}", sol.iterations, bellman_residual(&gw, &sol.q));
    println!("V*(start) = {:.3}", sol.v[gw.start()]);
    println!("greedy policy normalized return = {:.6}", normalized_return(&gw, &sol.policy)?);
    for r in 0..gw.height {
        let row: String = (0..gw.width)
            .map(|c| {
                let v = sol.v[r * gw.width + c];
                if v > 5.0 { '#' } else if v > 0.0 { '+' } else if v > -5.0 { '.' } else { '-' }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
