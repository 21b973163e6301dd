//! Numerical substrate: unitary DFT pair, channel frequency response and
//! dense complex matrices with a Cholesky log-determinant.
//!
//! Transforms inside the signal path are unitary (scale `1/sqrt(n)`); the
//! channel frequency response is the plain, unnormalized DFT so that a one-tap
//! equalizer divides by it directly.

mod fft;
mod matrix;

pub use fft::{dft, fft_unnormalized, idft, is_power_of_two, unnormalized_freq_response};
pub use matrix::{logdet2_psd, ComplexMatrix};

use num_complex::Complex64;

/// Euclidean norm of a complex vector.
pub fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute element-wise difference; `f64::INFINITY` on length mismatch.
pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Inner product `<a, b> = sum conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
