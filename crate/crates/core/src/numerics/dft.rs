//! Discrete Fourier transform of real signals.
//!
//! Convention: `X_k = Σ_j c_j exp(+2πi·jk/n)` with no `1/n` factor. This is
//! the sign under which the `k`-th value is the eigenvalue of the circulant
//! matrix whose first row is `c`, paired with eigenvector `(ω^{jk})_j`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Signals at least this long with power-of-two length go through the FFT.
const FFT_MIN_LEN: usize = 64;

/// DFT of a real signal. Direct summation for short or non power-of-two
/// lengths, radix-2 FFT otherwise; both follow the same convention.
pub fn dft_real(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    if n >= FFT_MIN_LEN && n.is_power_of_two() {
        fft_real(signal)
    } else {
        dft_direct(signal)
    }
}

/// `O(n²)` direct sum. The twiddle angle is reduced modulo `n` before the
/// trigonometric call so large `jk` products do not lose precision.
pub fn dft_direct(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (j, &c) in signal.iter().enumerate() {
                let phase = 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                re += c * phase.cos();
                im += c * phase.sin();
            }
            Complex64::new(re, im)
        })
        .collect()
}

fn fft_real(signal: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    // rustfft's unnormalized inverse transform uses the positive exponent.
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf
}
