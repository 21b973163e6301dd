use std::f64::consts::PI;

use num_complex::Complex64;

use super::ChannelImpulseResponse;
use crate::error::{Error, Result};
use crate::spectral::{is_power_of_two, unnormalized_freq_response, ComplexMatrix};

/// Size-`M` circulant channel described by its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantChannel {
    generator: Vec<Complex64>,
}

impl CirculantChannel {
    pub fn from_generator(generator: Vec<Complex64>) -> Result<Self> {
        if !is_power_of_two(generator.len()) {
            return Err(Error::NotPowerOfTwo(generator.len()));
        }
        Ok(Self { generator })
    }

    /// Zero-pads the impulse response to `size` samples.
    pub fn build(cir: &ChannelImpulseResponse, size: usize) -> Result<Self> {
        if !is_power_of_two(size) {
            return Err(Error::NotPowerOfTwo(size));
        }
        if cir.len() > size {
            return Err(Error::TapsTooLong {
                taps: cir.len(),
                max: size,
            });
        }
        let mut generator = vec![Complex64::new(0.0, 0.0); size];
        generator[..cir.len()].copy_from_slice(cir.taps());
        Ok(Self { generator })
    }

    pub fn size(&self) -> usize {
        self.generator.len()
    }

    pub fn generator(&self) -> &[Complex64] {
        &self.generator
    }

    /// Dense matrix with entries `C[p][q] = g[(p - q) mod M]`.
    pub fn to_dense(&self) -> ComplexMatrix {
        let m = self.size();
        ComplexMatrix::from_fn(m, m, |p, q| self.generator[(p + m - q) % m])
    }

    /// Unnormalized frequency response; also the eigenvalues of the matrix.
    pub fn freq_response(&self) -> Vec<Complex64> {
        unnormalized_freq_response(&self.generator, self.size()).expect("power-of-two size")
    }

    /// Top-left block `A` and top-right block `B`; the matrix is `[[A, B], [B, A]]`.
    pub fn extract_blocks(&self) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let m = self.size();
        if !m.is_multiple_of(2) {
            return Err(Error::OddSize(m));
        }
        let dense = self.to_dense();
        let h = m / 2;
        Ok((dense.block(0, 0, h, h), dense.block(0, h, h, h)))
    }

    fn halves(&self) -> Result<(&[Complex64], &[Complex64])> {
        let m = self.size();
        if m < 2 {
            return Err(Error::OddSize(m));
        }
        Ok(self.generator.split_at(m / 2))
    }

    /// Positive polarized channel `A + B`, a circulant of half size with the
    /// folded generator `g_n + g_{n+M/2}`.
    pub fn positive_child(&self) -> Result<Self> {
        let (lo, hi) = self.halves()?;
        Ok(Self {
            generator: lo.iter().zip(hi).map(|(a, b)| a + b).collect(),
        })
    }

    /// Negative polarized channel `W^H (A - B) W` with the FFT-style mixer.
    ///
    /// `A - B` is negacyclic with generator `g_n - g_{n+M/2}`; the mixer turns
    /// it into a circulant whose generator is that sequence modulated by
    /// `exp(-j 2 pi n / M)`.
    pub fn negative_child(&self) -> Result<Self> {
        let (lo, hi) = self.halves()?;
        let m = self.size() as f64;
        Ok(Self {
            generator: lo
                .iter()
                .zip(hi)
                .enumerate()
                .map(|(n, (a, b))| (a - b) * Complex64::from_polar(1.0, -2.0 * PI * n as f64 / m))
                .collect(),
        })
    }

    /// Positive child built from the triangular blocks of the tap sequence
    /// taken literally (`H + H_C` with `H` lower triangular Toeplitz and `H_C`
    /// its circular complement, both of half size). Generator entries at or
    /// beyond `M/2` are dropped instead of folded; equals
    /// [`positive_child`](Self::positive_child) whenever they are zero.
    pub fn literal_positive_child(&self) -> Result<Self> {
        let (lo, _) = self.halves()?;
        Ok(Self {
            generator: lo.to_vec(),
        })
    }

    /// Negative child from the literal triangular blocks (`H - H_C` mixed by
    /// `W`); the tap sequence truncated to `M/2` and modulated by
    /// `exp(-j 2 pi n / M)`.
    pub fn literal_negative_child(&self) -> Result<Self> {
        let (lo, _) = self.halves()?;
        let m = self.size() as f64;
        Ok(Self {
            generator: lo
                .iter()
                .enumerate()
                .map(|(n, a)| a * Complex64::from_polar(1.0, -2.0 * PI * n as f64 / m))
                .collect(),
        })
    }

    /// Index of the last non-zero generator entry plus one.
    pub fn support_len(&self) -> usize {
        self.generator
            .iter()
            .rposition(|g| g.norm_sqr() > 0.0)
            .map_or(0, |i| i + 1)
    }
}

/// `n x n` lower triangular Toeplitz matrix with first column `taps` (truncated or padded).
pub fn lower_toeplitz(taps: &[Complex64], n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |p, q| {
        if p >= q {
            taps.get(p - q).copied().unwrap_or_default()
        } else {
            Complex64::default()
        }
    })
}

/// Circular complement of [`lower_toeplitz`]: strictly upper triangular with
/// entry `(p, q)` equal to `taps[n + p - q]` for `q > p`.
pub fn circular_complement(taps: &[Complex64], n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |p, q| {
        if q > p {
            taps.get(n + p - q).copied().unwrap_or_default()
        } else {
            Complex64::default()
        }
    })
}

/// Sub-blocks of the quarter-size channel used to analyse the MI split.
#[derive(Debug, Clone)]
pub struct AppendixABlocks {
    /// Top-left `N/8` block of the lower triangular Toeplitz `H_{N/4}`.
    pub b: ComplexMatrix,
    /// Bottom-left `N/8` block of `H_{N/4}` (its circular complement part).
    pub d: ComplexMatrix,
    /// Spectral norm of `D B^H`.
    pub offdiag_norm: f64,
}

/// Decomposes `H_{N/4} = [[B, 0], [D, B]]` and measures the coupling `D B^H`
/// that separates the positive and negative MI.
pub fn appendix_a_subblocks(cir: &ChannelImpulseResponse, n: usize) -> Result<AppendixABlocks> {
    if !is_power_of_two(n) || n < 8 {
        return Err(Error::NotPowerOfTwo(n));
    }
    if cir.len() > n / 4 {
        return Err(Error::TapsTooLong {
            taps: cir.len(),
            max: n / 4,
        });
    }
    let quarter = lower_toeplitz(cir.taps(), n / 4);
    let eighth = n / 8;
    let b = quarter.block(0, 0, eighth, eighth);
    let d = quarter.block(eighth, 0, eighth, eighth);
    let coupling = d.matmul(&b.adjoint());
    let offdiag_norm = if coupling.max_abs() == 0.0 {
        0.0
    } else {
        coupling.spectral_norm()
    };
    Ok(AppendixABlocks { b, d, offdiag_norm })
}
