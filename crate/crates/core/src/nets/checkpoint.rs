//! JSON parameter checkpoints.
//!
//! Layout (stable across versions):
//!
//! ```json
//! {
//!   "format": "lff-lab-checkpoint-v1",
//!   "fourier": { "include_two_pi": true, "concat_input": true, "trainable": true } | null,
//!   "layers": [ { "ntk_parameterization": false, "has_bias": true }, ... ],
//!   "arrays": [ { "name": "fourier.basis", "shape": [rows, cols], "data": [...] }, ... ]
//! }
//! ```
//!
//! `arrays` is ordered `fourier.basis` (if any, frozen or not), then
//! `affine.{i}.weight` and `affine.{i}.bias` for each layer `i`. Data is
//! row-major; weights are `fan_out x fan_in`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fourier::{FourierLayer, FourierOptions};
use super::network::{AffineLayer, Network};
use crate::error::{contract, Result};
use crate::numerics::Matrix;

pub const CHECKPOINT_FORMAT: &str = "lff-lab-checkpoint-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMeta {
    pub ntk_parameterization: bool,
    pub has_bias: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub fourier: Option<FourierOptions>,
    pub layers: Vec<LayerMeta>,
    pub arrays: Vec<NamedArray>,
}

fn array(name: String, m: &Matrix) -> NamedArray {
    NamedArray {
        name,
        shape: [m.rows(), m.cols()],
        data: m.as_slice().to_vec(),
    }
}

impl Checkpoint {
    pub fn from_network(net: &Network) -> Self {
        let mut arrays = Vec::new();
        if let Some(f) = &net.fourier {
            arrays.push(array("fourier.basis".into(), &f.basis));
        }
        for (i, l) in net.layers.iter().enumerate() {
            arrays.push(array(format!("affine.{i}.weight"), &l.weights));
            if let Some(b) = &l.bias {
                arrays.push(NamedArray {
                    name: format!("affine.{i}.bias"),
                    shape: [b.len(), 1],
                    data: b.clone(),
                });
            }
        }
        Self {
            format: CHECKPOINT_FORMAT.into(),
            fourier: net.fourier.as_ref().map(|f| f.options),
            layers: net
                .layers
                .iter()
                .map(|l| LayerMeta {
                    ntk_parameterization: l.ntk_parameterization,
                    has_bias: l.bias.is_some(),
                })
                .collect(),
            arrays,
        }
    }

    pub fn to_network(&self) -> Result<Network> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(contract("Checkpoint::to_network", format!("unknown format {:?}", self.format)));
        }
        let mut arrays = self.arrays.iter();
        let mut take = |expected: &str| -> Result<&NamedArray> {
            let a = arrays
                .next()
                .ok_or_else(|| contract("Checkpoint::to_network", format!("missing array {expected}")))?;
            if a.name != expected {
                return Err(contract(
                    "Checkpoint::to_network",
                    format!("expected array {expected}, found {}", a.name),
                ));
            }
            Ok(a)
        };
        let fourier = match self.fourier {
            Some(options) => {
                let a = take("fourier.basis")?;
                Some(FourierLayer::new(Matrix::from_vec(a.shape[0], a.shape[1], a.data.clone())?, options)?)
            }
            None => None,
        };
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, meta) in self.layers.iter().enumerate() {
            let w = take(&format!("affine.{i}.weight"))?;
            let weights = Matrix::from_vec(w.shape[0], w.shape[1], w.data.clone())?;
            let bias = if meta.has_bias {
                Some(take(&format!("affine.{i}.bias"))?.data.clone())
            } else {
                None
            };
            layers.push(AffineLayer::from_parts(weights, bias, meta.ntk_parameterization)?);
        }
        Network::new(fourier, layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
