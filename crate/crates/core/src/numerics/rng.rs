use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Matrix;
use crate::error::{contract, Result};

/// Seeded random stream backed by ChaCha8.
///
/// ChaCha8 output is specified bit-for-bit, so a seed reproduces the same
/// samples on every platform. Independent streams for the same seed are
/// obtained with [`RngStream::substream`], which selects a different ChaCha
/// stream id rather than perturbing the seed.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Fresh stream sharing the seed but on an independent ChaCha stream.
    pub fn substream(&self, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        Self {
            seed: self.seed,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        // Fisher-Yates driven by `index`, kept local so the sequence only
        // depends on this crate's draw order.
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `rows x cols` matrix of i.i.d. `N(0, stddev²)` samples, filled row-major.
pub fn gaussian_sample(rng: &mut RngStream, rows: usize, cols: usize, stddev: f64) -> Result<Matrix> {
    if !(stddev >= 0.0) {
        return Err(contract("gaussian_sample", format!("stddev {stddev} < 0")));
    }
    if stddev == 0.0 {
        return Ok(Matrix::zeros(rows, cols));
    }
    Ok(Matrix::from_fn(rows, cols, |_, _| stddev * rng.normal()))
}
