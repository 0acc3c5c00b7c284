//! Embeds a few 2-D points with Gaussian and log-uniform Fourier bases and
//! fits a small LFF network to a high-frequency 1-D function.

use lff_lab::nets::{fit_regression, init_gaussian_basis, init_loguniform_basis, FourierOptions, NetSpec, OptimizerConfig};
use lff_lab::numerics::{norm, Matrix, RngStream};

fn main() -> lff_lab::Result<()> {
    let mut rng = RngStream::new(0);
    let gaussian = init_gaussian_basis(&mut rng, 2, 8, 1.0, FourierOptions::default())?;
    let loguniform = init_loguniform_basis(2, 3, 0.5, FourierOptions::default())?;
    for x in [[0.0, 0.0], [0.25, -0.5], [1.0, 1.0]] {
        let e = gaussian.embed(&x)?;
        // The sin/cos block always has squared norm d_fourier / 2.
        let block = norm(&e[..gaussian.d_fourier()]);
        println!("x = {x:?}: {} features, sin/cos norm^2 = {:.3}", e.len(), block * block);
    }
    println!("log-uniform basis rows:");
    for r in 0..loguniform.basis.rows() {
        println!("  {:?}", loguniform.basis.row(r));
    }

    let n = 128;
    let xs = Matrix::from_fn(n, 1, |i, _| i as f64 / n as f64 * 2.0 - 1.0);
    let ys = Matrix::from_fn(n, 1, |i, _| (12.0 * xs[(i, 0)]).sin());
    let opt = OptimizerConfig::adam(3e-3);
    for (label, spec) in [
        ("mlp", NetSpec::mlp("mlp", vec![64, 64])),
        ("lff sigma=2", NetSpec::lff("lff", vec![64, 64], 64, 2.0)),
    ] {
        let mut net = spec.build(1, 1, &mut RngStream::new(1))?;
        let loss = fit_regression(&mut net, &xs, &ys, 1500, &opt, n, &mut RngStream::new(2))?;
        println!("{label:>12}: final training MSE {:.5}", loss.last().copied().unwrap_or(f64::NAN));
    }
    Ok(())
}
