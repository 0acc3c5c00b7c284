//! Empirical NTK of a wide two-layer Fourier network against the closed-form
//! kernel (1 + cos t) exp(sigma^2 (cos t - 1)) on the unit circle.

use lff_lab::ntk::{analytic_lff_kernel_angle, empirical_ntk, two_layer_fourier_model, CircleDataset};
use lff_lab::numerics::RngStream;

fn main() -> lff_lab::Result<()> {
    let data = CircleDataset::new(16);
    let offsets = data.offsets();
    for sigma in [0.3, 1.0, 3.0] {
        println!("sigma = {sigma}");
        for width in [64, 1024] {
            let mut net = two_layer_fourier_model(&mut RngStream::new(7), 2, width, sigma)?;
            let k = empirical_ntk(&mut net, &data.points)?;
            let worst = offsets
                .iter()
                .enumerate()
                .map(|(j, &t)| (k[(0, j)] - analytic_lff_kernel_angle(t, sigma)).abs())
                .fold(0.0, f64::max);
            println!("  width {width:>5}: max |empirical - analytic| = {worst:.4}");
        }
        let row: Vec<String> = offsets.iter().take(5).map(|&t| format!("{:.3}", analytic_lff_kernel_angle(t, sigma))).collect();
        println!("  analytic k(0), k(1), ...: {}", row.join(" "));
    }
    Ok(())
}
