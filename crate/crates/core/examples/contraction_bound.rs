//! Smallest sigma^2 for which kernel-based Q-iteration is a contraction on
//! a buffer of well-separated points, and the conditions checked directly.

use lff_lab::experiments::separated_sphere_points;
use lff_lab::ntk::{analytic_kernel_matrix, contraction_check, min_separation, sigma_contraction_bound};
use lff_lab::numerics::RngStream;

fn main() -> lff_lab::Result<()> {
    let (gamma, delta) = (0.99, 0.1);
    for n in [10, 100, 1000] {
        println!("N = {n:>4}: sigma^2 >= {:.3}", sigma_contraction_bound(n, gamma, delta)?);
    }
    let points = separated_sphere_points(51, 4, delta, &mut RngStream::new(0))?;
    println!("51 points on S^3, min 1 - x.x' = {:.3}", min_separation(&points));
    let bound = sigma_contraction_bound(50, gamma, delta)?;
    let rho = vec![1.0 / 51.0; 51];
    for scale in [1.0, 0.25] {
        let k = analytic_kernel_matrix(&points, (bound * scale).sqrt())?;
        let alpha = 0.5 / (0..51).map(|i| k[(i, i)] * rho[i]).fold(0.0, f64::max);
        let r = contraction_check(&k, &rho, alpha, gamma)?;
        println!(
            "sigma^2 = {:>7.3}: step condition {}, dominance condition {} (worst margin {:.3e})",
            bound * scale,
            r.step_condition,
            r.dominance_condition,
            r.worst_dominance_margin()
        );
    }
    Ok(())
}
