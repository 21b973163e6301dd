use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

fn check_size(len: usize, size: usize) -> Result<()> {
    if !is_power_of_two(size) {
        return Err(Error::NotPowerOfTwo(size));
    }
    if len != size {
        return Err(Error::LengthMismatch {
            expected: size,
            got: len,
        });
    }
    Ok(())
}

/// In-place iterative radix-2 decimation-in-time FFT without scaling.
///
/// `inverse` selects the `exp(+j...)` kernel. The length must be a power of two.
pub fn fft_unnormalized(buf: &mut [Complex64], inverse: bool) -> Result<()> {
    let n = buf.len();
    if !is_power_of_two(n) {
        return Err(Error::NotPowerOfTwo(n));
    }
    if n == 1 {
        return Ok(());
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = sign * 2.0 * PI / len as f64;
        // Twiddles are evaluated directly rather than by repeated multiplication
        // so the round-off stays at a few ulps for large sizes.
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, step * k as f64))
            .collect();
        for chunk in buf.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
            }
        }
        len <<= 1;
    }
    Ok(())
}

fn unitary(x: &[Complex64], size: usize, inverse: bool) -> Result<Vec<Complex64>> {
    check_size(x.len(), size)?;
    let mut out = x.to_vec();
    fft_unnormalized(&mut out, inverse)?;
    let scale = 1.0 / (size as f64).sqrt();
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Unitary forward DFT of size `size`.
pub fn dft(x: &[Complex64], size: usize) -> Result<Vec<Complex64>> {
    unitary(x, size, false)
}

/// Unitary inverse DFT; the exact inverse of [`dft`].
pub fn idft(x: &[Complex64], size: usize) -> Result<Vec<Complex64>> {
    unitary(x, size, true)
}

/// `H(l) = sum_n h_n exp(-j 2 pi l n / n_bins)` for `l = 0..n_bins`, with `h`
/// zero-padded to `n_bins`.
pub fn unnormalized_freq_response(h: &[Complex64], n_bins: usize) -> Result<Vec<Complex64>> {
    if !is_power_of_two(n_bins) {
        return Err(Error::NotPowerOfTwo(n_bins));
    }
    if h.len() > n_bins {
        return Err(Error::TapsTooLong {
            taps: h.len(),
            max: n_bins,
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n_bins];
    out[..h.len()].copy_from_slice(h);
    fft_unnormalized(&mut out, false)?;
    Ok(out)
}
