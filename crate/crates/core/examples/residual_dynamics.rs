//! Residual of kernel gradient flow on pure cos(k theta) targets: each
//! frequency decays as exp(-eta lambda_k t). Then a real network trained by
//! gradient descent on the same targets.

use lff_lab::ntk::{
    analytic_kernel_matrix, circulant_spectrum, flow_residual, frequency_magnitudes, lazy_training_check,
    two_layer_fourier_model, CircleDataset,
};
use lff_lab::numerics::RngStream;

fn main() -> lff_lab::Result<()> {
    let data = CircleDataset::new(32);
    let times = [0.0, 0.5, 1.0, 2.0, 5.0];
    let sigma = 1.0;
    let k = analytic_kernel_matrix(&data.points, sigma)?;
    let spec = circulant_spectrum(&k)?;
    for freq in [1, 4, 8] {
        let y = data.cosine(freq);
        let flow = flow_residual(&k, &vec![0.0; y.len()], &y, 1.0, &times)?;
        let mags: Vec<String> = flow.residuals.iter().map(|r| format!("{:.3}", frequency_magnitudes(r)[freq])).collect();
        println!("k = {freq} (lambda {:.3}): |r_k(t)| = {}", spec.eigenvalue_at(freq).unwrap_or(f64::NAN), mags.join(" "));
    }

    let net = two_layer_fourier_model(&mut RngStream::new(3), 2, 1024, 0.1)?;
    let report = lazy_training_check(&net, &data, &[1, 4, 8], 200, 0.5)?;
    for f in &report.fits {
        println!(
            "trained net, k = {}: predicted half-life {:.1} steps, observed {:?}",
            f.frequency, f.predicted_half_life, f.observed_half_life
        );
    }
    println!("order of half-lives matches the kernel: {}", report.order_matches);
    Ok(())
}
