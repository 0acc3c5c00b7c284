use serde::{Deserialize, Serialize};

use super::grid::GridWorld;
use crate::error::{contract, Result};
use crate::numerics::{Matrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum EncodingMode {
    NormalizedCoords,
    /// Per-cell `N(0, I)` codes of width `dim`, blurred with a Gaussian of
    /// `length_scale` cells over grid distance and rescaled to unit mean
    /// row norm, followed by the normalized coordinates.
    SmoothRandom {
        dim: usize,
        #[serde(default = "default_length_scale")]
        length_scale: f64,
    },
}

fn default_length_scale() -> f64 {
    2.0
}

impl Default for EncodingMode {
    fn default() -> Self {
        Self::NormalizedCoords
    }
}

/// Fixed per-state observation vectors, one row per cell.
#[derive(Clone, Debug)]
pub struct StateEncoding {
    pub mode: EncodingMode,
    table: Matrix,
}

fn normalized(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * i as f64 / (n - 1) as f64 - 1.0
    }
}

impl StateEncoding {
    pub fn new(gw: &GridWorld, mode: EncodingMode, rng: &mut RngStream) -> Result<Self> {
        let n = gw.num_cells();
        let coords = Matrix::from_fn(n, 2, |s, c| {
            let (r, col) = gw.coords(s);
            if c == 0 {
                normalized(r, gw.height)
            } else {
                normalized(col, gw.width)
            }
        });
        let table = match mode {
            EncodingMode::NormalizedCoords => coords,
            EncodingMode::SmoothRandom { dim, length_scale } => {
                if dim == 0 {
                    return Err(contract("StateEncoding", "smooth_random needs dim >= 1"));
                }
                if !(length_scale >= 0.0) {
                    return Err(contract("StateEncoding", format!("length scale {length_scale} < 0")));
                }
                let codes = Matrix::from_fn(n, dim, |_, _| rng.normal());
                let blur = Matrix::from_fn(n, n, |a, b| {
                    let (ra, ca) = gw.coords(a);
                    let (rb, cb) = gw.coords(b);
                    let d2 = (ra as f64 - rb as f64).powi(2) + (ca as f64 - cb as f64).powi(2);
                    if length_scale == 0.0 {
                        if d2 == 0.0 { 1.0 } else { 0.0 }
                    } else {
                        (-d2 / (2.0 * length_scale * length_scale)).exp()
                    }
                });
                let smooth = blur.matmul(&codes)?;
                let mean_norm = (0..n).map(|s| smooth.row(s).iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() / n as f64;
                smooth.scale(1.0 / mean_norm).hcat(&coords)?
            }
        };
        Ok(Self { mode, table })
    }

    pub fn normalized_coords(gw: &GridWorld) -> Self {
        Self::new(gw, EncodingMode::NormalizedCoords, &mut RngStream::new(0)).expect("coords never fail")
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn encode(&self, state: usize) -> &[f64] {
        self.table.row(state)
    }

    pub fn batch(&self, states: &[usize]) -> Matrix {
        self.table.select_rows(states)
    }
}
