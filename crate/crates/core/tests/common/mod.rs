//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use lff_lab::nets::{mse_loss, FourierOptions, NetKind, NetSpec, Network};
use lff_lab::numerics::Matrix;

/// Mean squared error evaluated without any of the backprop machinery.
fn loss(net: &Network, x: &Matrix, y: &Matrix) -> f64 {
    let pred = net.predict(x).unwrap();
    let diff = pred.sub(y).unwrap();
    diff.as_slice().iter().map(|d| d * d).sum::<f64>() / diff.as_slice().len() as f64
}

/// Largest relative disagreement between backprop and central finite
/// differences (step `h`) over every trainable scalar.
///
/// Relative error is `|a - b| / max(|a|, |b|, floor)`; the floor keeps
/// gradients that sit at round-off level from dominating.
pub fn gradient_check(net: &mut Network, x: &Matrix, y: &Matrix, h: f64, floor: f64) -> (f64, usize) {
    net.zero_grad();
    let pred = net.forward(x).unwrap();
    let (_, g) = mse_loss(&pred, y).unwrap();
    net.backward(&g).unwrap();
    let analytic: Vec<Vec<f64>> = net.parameters_mut().iter().map(|p| p.grad.to_vec()).collect();

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let n_tensors = analytic.len();
    for t in 0..n_tensors {
        let len = analytic[t].len();
        for i in 0..len {
            let orig = net.parameters_mut()[t].value[i];
            net.parameters_mut()[t].value[i] = orig + h;
            let up = loss(net, x, y);
            net.parameters_mut()[t].value[i] = orig - h;
            let down = loss(net, x, y);
            net.parameters_mut()[t].value[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked)
}

/// Architecture grid for gradient checks: all eight Fourier flag
/// combinations plus plain and NTK-parameterized MLPs.
pub fn gradient_check_specs() -> Vec<NetSpec> {
    let mut specs = Vec::new();
    for two_pi in [false, true] {
        for concat_input in [false, true] {
            for trainable in [false, true] {
                let opts = FourierOptions {
                    include_two_pi: two_pi,
                    concat_input,
                    trainable,
                };
                specs.push(NetSpec {
                    label: format!("lff two_pi={two_pi} concat={concat_input} trainable={trainable}"),
                    two_pi: opts.include_two_pi,
                    concat_input: opts.concat_input,
                    trainable: opts.trainable,
                    ..NetSpec::lff("", vec![7, 5], 6, 0.8)
                });
            }
        }
    }
    specs.push(NetSpec::mlp("mlp", vec![6, 6]));
    specs.push(NetSpec {
        bias: false,
        ntk_parameterization: true,
        ..NetSpec::mlp("mlp ntk no-bias", vec![6])
    });
    specs.push(NetSpec {
        bias: false,
        ntk_parameterization: true,
        ..NetSpec::lff("lff ntk", vec![], 8, 1.0)
    });
    assert!(specs.iter().filter(|s| s.kind == NetKind::Lff).count() >= 8);
    specs
}
