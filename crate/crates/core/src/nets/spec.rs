use serde::{Deserialize, Serialize};

use super::fourier::{init_gaussian_basis, init_loguniform_basis, FourierOptions};
use super::network::{AffineLayer, Network};
use crate::error::{contract, Result};
use crate::numerics::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    Mlp,
    Lff,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisInit {
    Gaussian,
    Loguniform,
}

/// Declarative network architecture.
///
/// Field defaults follow the state-based SAC setup: a 1024-wide Fourier
/// layer with `σ = 0.001`, two hidden layers of 1024 units, trainable basis
/// and input concatenation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSpec {
    pub label: String,
    pub kind: NetKind,
    pub hidden: Vec<usize>,
    pub d_fourier: usize,
    pub sigma: f64,
    pub two_pi: bool,
    pub concat_input: bool,
    pub trainable: bool,
    pub init: BasisInit,
    pub loguniform_k: usize,
    pub loguniform_c: f64,
    pub bias: bool,
    pub ntk_parameterization: bool,
    /// Label of another net whose parameter count this one should match by
    /// resizing its first hidden layer.
    pub match_params: Option<String>,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            label: "lff".into(),
            kind: NetKind::Lff,
            hidden: vec![1024, 1024],
            d_fourier: 1024,
            sigma: 0.001,
            two_pi: true,
            concat_input: true,
            trainable: true,
            init: BasisInit::Gaussian,
            loguniform_k: 8,
            loguniform_c: 0.5,
            bias: true,
            ntk_parameterization: false,
            match_params: None,
        }
    }
}

impl NetSpec {
    pub fn mlp(label: &str, hidden: Vec<usize>) -> Self {
        Self {
            label: label.into(),
            kind: NetKind::Mlp,
            hidden,
            ..Self::default()
        }
    }

    pub fn lff(label: &str, hidden: Vec<usize>, d_fourier: usize, sigma: f64) -> Self {
        Self {
            label: label.into(),
            kind: NetKind::Lff,
            hidden,
            d_fourier,
            sigma,
            ..Self::default()
        }
    }

    fn fourier_options(&self) -> FourierOptions {
        FourierOptions {
            include_two_pi: self.two_pi,
            concat_input: self.concat_input,
            trainable: self.trainable,
        }
    }

    /// Width of the Fourier embedding fed to the first affine layer.
    fn embedding_width(&self, d_input: usize) -> usize {
        match self.kind {
            NetKind::Mlp => d_input,
            NetKind::Lff => {
                let d_fourier = match self.init {
                    BasisInit::Gaussian => self.d_fourier,
                    BasisInit::Loguniform => 2 * self.loguniform_k * d_input,
                };
                d_fourier + if self.concat_input { d_input } else { 0 }
            }
        }
    }

    pub fn parameter_count(&self, d_input: usize, d_output: usize) -> usize {
        let mut count = 0;
        if self.kind == NetKind::Lff {
            count += (self.embedding_width(d_input) - if self.concat_input { d_input } else { 0 }) / 2 * d_input;
        }
        let mut width = self.embedding_width(d_input);
        for &h in self.hidden.iter().chain(std::iter::once(&d_output)) {
            count += width * h + if self.bias { h } else { 0 };
            width = h;
        }
        count
    }

    /// Copy with the first hidden layer resized so the parameter count is as
    /// close as possible to `target`.
    pub fn matched_to(&self, target: usize, d_input: usize, d_output: usize) -> Self {
        let mut best = self.clone();
        if self.hidden.is_empty() {
            return best;
        }
        let mut best_gap = usize::MAX;
        for w in 1..=8192 {
            let mut cand = self.clone();
            cand.hidden[0] = w;
            let gap = cand.parameter_count(d_input, d_output).abs_diff(target);
            if gap < best_gap {
                best_gap = gap;
                best = cand;
            }
        }
        best
    }

    /// Instantiates the network. Hidden layers use He-uniform weights, or
    /// `N(0, 1)` with the `√(2/fan_in)` prefactor when
    /// `ntk_parameterization` is set. Biases start at zero.
    pub fn build(&self, d_input: usize, d_output: usize, rng: &mut RngStream) -> Result<Network> {
        if d_input == 0 || d_output == 0 {
            return Err(contract("NetSpec::build", "input and output dimensions must be positive"));
        }
        let fourier = match self.kind {
            NetKind::Mlp => None,
            NetKind::Lff => Some(match self.init {
                BasisInit::Gaussian => {
                    init_gaussian_basis(rng, d_input, self.d_fourier, self.sigma, self.fourier_options())?
                }
                BasisInit::Loguniform => {
                    init_loguniform_basis(d_input, self.loguniform_k, self.loguniform_c, self.fourier_options())?
                }
            }),
        };
        let mut width = self.embedding_width(d_input);
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        for &h in self.hidden.iter().chain(std::iter::once(&d_output)) {
            let layer = if self.ntk_parameterization {
                AffineLayer::ntk_normal(rng, width, h, self.bias)
            } else {
                AffineLayer::he_uniform(rng, width, h, self.bias)
            };
            layers.push(layer);
            width = h;
        }
        Network::new(fourier, layers)
    }
}

/// Resolves `match_params` references within a list of specs.
pub fn resolve_matches(specs: &[NetSpec], d_input: usize, d_output: usize) -> Result<Vec<NetSpec>> {
    specs
        .iter()
        .map(|s| match &s.match_params {
            None => Ok(s.clone()),
            Some(target) => {
                let other = specs
                    .iter()
                    .find(|o| &o.label == target)
                    .ok_or_else(|| contract("resolve_matches", format!("no net labelled {target:?}")))?;
                Ok(s.matched_to(other.parameter_count(d_input, d_output), d_input, d_output))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_agrees_with_built_network() {
        let mut rng = RngStream::new(0);
        for spec in [
            NetSpec::lff("a", vec![16, 8], 12, 0.1),
            NetSpec::mlp("b", vec![10, 10, 10]),
            NetSpec {
                init: BasisInit::Loguniform,
                loguniform_k: 3,
                ..NetSpec::lff("c", vec![5], 0, 0.0)
            },
            NetSpec {
                concat_input: false,
                bias: false,
                ..NetSpec::lff("d", vec![7], 8, 1.0)
            },
        ] {
            let net = spec.build(3, 5, &mut rng).unwrap();
            assert_eq!(net.parameter_count(), spec.parameter_count(3, 5), "{}", spec.label);
        }
    }

    #[test]
    fn matching_parameter_counts() {
        let lff = NetSpec::lff("lff", vec![64, 64], 64, 0.01);
        let mlp = NetSpec {
            match_params: Some("lff".into()),
            ..NetSpec::mlp("mlp", vec![64, 64, 64])
        };
        let resolved = resolve_matches(&[lff.clone(), mlp], 2, 5).unwrap();
        let target = lff.parameter_count(2, 5) as f64;
        let got = resolved[1].parameter_count(2, 5) as f64;
        assert!((got - target).abs() / target < 0.02, "{got} vs {target}");
    }
}
