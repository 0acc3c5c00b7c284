use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{contract, Error, Result};
use crate::numerics::{dft_real, jacobi_eig, Matrix};

const CIRCULANT_TOL: f64 = 1e-8;

/// Eigenvalues of a kernel matrix indexed by frequency.
#[derive(Clone, Debug, Serialize)]
pub struct KernelSpectrum {
    /// Every eigenvalue; for circulant kernels entry `k` belongs to the
    /// Fourier mode `e^{2πijk/n}`.
    pub eigenvalues: Vec<f64>,
    /// `(frequency, eigenvalue)` for frequencies `0..=n/2`, the `±k` pair
    /// averaged. For non-circulant kernels the "frequency" is the rank in
    /// descending order.
    pub by_frequency: Vec<(usize, f64)>,
    pub circulant: bool,
}

impl KernelSpectrum {
    pub fn eigenvalue_at(&self, frequency: usize) -> Option<f64> {
        self.by_frequency.iter().find(|(k, _)| *k == frequency).map(|(_, v)| *v)
    }
}

/// Largest `|K_ij - K_{0,(j-i) mod n}|` relative to `max(1, max|K|)`.
pub fn circulant_deviation(k: &Matrix) -> f64 {
    let n = k.rows();
    let scale = k.max_abs().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((k[(i, j)] - k[(0, (j + n - i) % n)]).abs());
        }
    }
    worst / scale
}

/// Spectrum of a circulant matrix from the DFT of its first row.
pub fn circulant_spectrum(k: &Matrix) -> Result<KernelSpectrum> {
    if !k.is_square() || k.rows() == 0 {
        return Err(contract("circulant_spectrum", format!("matrix {:?} is not square", k.shape())));
    }
    let dev = circulant_deviation(k);
    if dev > CIRCULANT_TOL {
        return Err(Error::NotCirculant { max_deviation: dev });
    }
    let n = k.rows();
    let spectrum = dft_real(k.row(0));
    let scale = k.max_abs().max(1.0) * n as f64;
    let worst_imag = spectrum.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_imag > CIRCULANT_TOL * scale {
        return Err(contract(
            "circulant_spectrum",
            format!("eigenvalues are not real (imaginary part {worst_imag}); matrix is not symmetric"),
        ));
    }
    let eigenvalues: Vec<f64> = spectrum.iter().map(|z| z.re).collect();
    let by_frequency = (0..=n / 2)
        .map(|f| {
            let mirror = (n - f) % n;
            (f, 0.5 * (eigenvalues[f] + eigenvalues[mirror]))
        })
        .collect();
    Ok(KernelSpectrum {
        eigenvalues,
        by_frequency,
        circulant: true,
    })
}

/// Circulant spectrum when the kernel is circulant, otherwise the Jacobi
/// eigenvalues in descending order.
pub fn kernel_spectrum(k: &Matrix) -> Result<KernelSpectrum> {
    match circulant_spectrum(k) {
        Ok(s) => Ok(s),
        Err(Error::NotCirculant { .. }) => {
            let eig = jacobi_eig(k)?;
            let by_frequency = eig.eigenvalues.iter().copied().enumerate().collect();
            Ok(KernelSpectrum {
                eigenvalues: eig.eigenvalues,
                by_frequency,
                circulant: false,
            })
        }
        Err(e) => Err(e),
    }
}

/// Norm of the projection of `values` (sampled at `n` evenly spaced circle
/// points) onto each frequency subspace `span{cos kθ, sin kθ}`, `k = 0..=n/2`.
pub fn frequency_magnitudes(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let spec = dft_real(values);
    (0..=n / 2)
        .map(|k| {
            let mirror = (n - k) % n;
            let energy = if mirror == k {
                spec[k].norm_sqr()
            } else {
                spec[k].norm_sqr() + spec[mirror].norm_sqr()
            };
            (energy / n as f64).sqrt()
        })
        .collect()
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln I_ν(a)` for the modified Bessel function of the first kind, integer
/// order, by summing its power series in log space.
pub fn log_bessel_i(order: usize, a: f64) -> f64 {
    if a == 0.0 {
        return if order == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let half_log = (0.5 * a).ln();
    // Running ln(s!) and ln((s+ν)!).
    let mut ln_fact_s = 0.0;
    let mut ln_fact_sv: f64 = (1..=order).map(|i| (i as f64).ln()).sum();
    let mut total = f64::NEG_INFINITY;
    let mut s = 0usize;
    loop {
        let term = (2 * s + order) as f64 * half_log - ln_fact_s - ln_fact_sv;
        total = log_add(total, term);
        // Terms peak near s ≈ a/2; stop once well past the peak and negligible.
        if s as f64 > 0.5 * a && term < total - 40.0 {
            break;
        }
        s += 1;
        ln_fact_s += (s as f64).ln();
        ln_fact_sv += ((s + order) as f64).ln();
    }
    total
}

/// Log-eigenvalues of the two-layer Fourier feature kernel on `n` evenly
/// spaced circle points, frequencies `0..=n/2`.
///
/// The kernel `(1 + cos θ) e^{σ²(cos θ - 1)}` has Fourier coefficients
/// `ĉ_j = e^{-σ²}[I_j(σ²) + (I_{j-1}(σ²) + I_{j+1}(σ²))/2]`, and sampling
/// at `n` points aliases them: `λ_k = n Σ_l ĉ_{k+ln}`. Working in log space
/// keeps eigenvalues far below `f64` roundoff of the kernel entries exact.
pub fn lff_circle_log_spectrum(n: usize, sigma: f64) -> Result<Vec<(usize, f64)>> {
    if n == 0 {
        return Err(contract("lff_circle_log_spectrum", "need at least one point"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(contract("lff_circle_log_spectrum", format!("sigma {sigma} must be finite and >= 0")));
    }
    let a = sigma * sigma;
    let mut cache = std::collections::HashMap::new();
    let mut log_i = |j: usize| *cache.entry(j).or_insert_with(|| log_bessel_i(j, a));
    let mut log_coef = |j: i64| {
        let j = j.unsigned_abs() as usize;
        let lower = log_i(j.abs_diff(1));
        let upper = log_i(j + 1);
        -a + log_add(log_i(j), log_add(lower, upper) - LN_2)
    };
    let aliases = 4i64;
    Ok((0..=n / 2)
        .map(|k| {
            let mut total = f64::NEG_INFINITY;
            for l in -aliases..=aliases {
                total = log_add(total, log_coef(k as i64 + l * n as i64));
            }
            (k, (n as f64).ln() + total)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntk::{analytic_kernel_matrix, CircleDataset};

    #[test]
    fn bessel_spot_values() {
        // Reference values of I_0, I_1, I_5 at 1 and 10.
        let cases = [
            (0, 1.0, 1.266_065_877_752_008_4),
            (1, 1.0, 0.565_159_103_992_485),
            (5, 1.0, 2.714_631_559_569_719e-4),
            (0, 10.0, 2_815.716_628_466_254),
            (5, 10.0, 777.188_286_403_259_9),
        ];
        for (order, a, want) in cases {
            let got = log_bessel_i(order, a).exp();
            assert!((got - want).abs() < 1e-12 * want, "I_{order}({a}) = {got}, want {want}");
        }
        assert_eq!(log_bessel_i(0, 0.0), 0.0);
        assert_eq!(log_bessel_i(3, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn log_spectrum_matches_dft_where_resolvable() {
        let n = 64;
        let ds = CircleDataset::new(n);
        for sigma in [0.5, 2.0, 6.0] {
            let k = analytic_kernel_matrix(&ds.points, sigma).unwrap();
            let dft = circulant_spectrum(&k).unwrap();
            let exact = lff_circle_log_spectrum(n, sigma).unwrap();
            let top = dft.by_frequency[0].1.max(dft.by_frequency[1].1);
            for ((f, lam), (g, log_lam)) in dft.by_frequency.iter().zip(&exact) {
                assert_eq!(f, g);
                if *lam > 1e-9 * top {
                    let rel = (lam - log_lam.exp()).abs() / lam;
                    assert!(rel < 1e-7, "sigma {sigma} k {f}: {lam} vs {}", log_lam.exp());
                }
            }
        }
    }

    #[test]
    fn circulant_agrees_with_jacobi_multiset() {
        let ds = CircleDataset::new(24);
        let k = analytic_kernel_matrix(&ds.points, 1.5).unwrap();
        let mut a = circulant_spectrum(&k).unwrap().eigenvalues;
        a.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let b = jacobi_eig(&k).unwrap().eigenvalues;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * k.max_abs() * 24.0);
        }
    }

    #[test]
    fn non_circulant_is_rejected_and_falls_back() {
        let mut k = Matrix::identity(5);
        k[(0, 1)] = 0.5;
        k[(1, 0)] = 0.5;
        assert!(matches!(circulant_spectrum(&k), Err(Error::NotCirculant { .. })));
        let s = kernel_spectrum(&k).unwrap();
        assert!(!s.circulant);
        assert!((s.eigenvalues[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn frequency_magnitudes_of_pure_modes() {
        let ds = CircleDataset::new(32);
        let mags = frequency_magnitudes(&ds.cosine(3));
        // ‖cos 3θ‖ = √(n/2) and all energy sits at k = 3.
        assert!((mags[3] - 4.0).abs() < 1e-12);
        assert!(mags.iter().enumerate().all(|(k, m)| k == 3 || *m < 1e-12));
        let ones = frequency_magnitudes(&[1.0; 32]);
        assert!((ones[0] - 32f64.sqrt()).abs() < 1e-12);
    }
}
