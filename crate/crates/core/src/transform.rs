//! The orthonormal polarization transform.
//!
//! One level at block size `M` is
//!
//! ```text
//! T_M = 1/sqrt(2) [ I   W ]
//!                 [ I  -W ]
//! ```
//!
//! with `W` a unit-modulus diagonal mixer of size `M/2`. The recursive
//! transform of depth `K` replaces the identity column by the transform of
//! half size, so only the positive branch is split again:
//! `T^R_{N,K} = T_N * diag(T^R_{N/2,K-1}, I)`, and `T^R_{N,0} = I`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{is_power_of_two, ComplexMatrix};

/// Largest frame size accepted by the dense materializations.
pub const DENSE_LIMIT: usize = 512;

/// Diagonal mixer `W` of size `M/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerW {
    diagonal: Vec<Complex64>,
}

impl MixerW {
    /// Arbitrary mixer; every entry must have unit modulus.
    pub fn new(diagonal: Vec<Complex64>) -> Result<Self> {
        if let Some(bad) = diagonal.iter().find(|d| (d.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::Config(format!("mixer entry {bad} is not unit modulus")));
        }
        Ok(Self { diagonal })
    }

    /// `W = I`, used by the direct-decoding path.
    pub fn identity(size: usize) -> Self {
        Self {
            diagonal: vec![Complex64::new(1.0, 0.0); size],
        }
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[Complex64] {
        &self.diagonal
    }
}

/// FFT-style mixer for block size `m`: `diag(Omega, j*Omega)` with
/// `Omega = diag(exp(j 2 pi k / m))`, `k < m/4`. For `m = 2` it is the scalar 1.
///
/// The two halves together are `exp(j 2 pi k / m)` for `k < m/2`.
pub fn build_mixer(m: usize) -> Result<MixerW> {
    if !is_power_of_two(m) || m < 2 {
        return Err(Error::NotPowerOfTwo(m));
    }
    let quarter = m / 4;
    let diagonal = if quarter == 0 {
        vec![Complex64::new(1.0, 0.0)]
    } else {
        let omega: Vec<Complex64> = (0..quarter)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
            .collect();
        let j = Complex64::new(0.0, 1.0);
        omega.iter().copied().chain(omega.iter().map(|o| j * o)).collect()
    };
    Ok(MixerW { diagonal })
}

/// Dense single-level transform `T_m` for mixer `w`.
pub fn materialize_t(m: usize, w: &MixerW) -> Result<ComplexMatrix> {
    if !is_power_of_two(m) || m < 2 {
        return Err(Error::NotPowerOfTwo(m));
    }
    if w.size() != m / 2 {
        return Err(Error::LengthMismatch {
            expected: m / 2,
            got: w.size(),
        });
    }
    let h = m / 2;
    let s = FRAC_1_SQRT_2;
    let mut t = ComplexMatrix::zeros(m, m);
    for i in 0..h {
        let wi = w.diagonal[i];
        t[(i, i)] = Complex64::new(s, 0.0);
        t[(h + i, i)] = Complex64::new(s, 0.0);
        t[(i, h + i)] = wi * s;
        t[(h + i, h + i)] = -wi * s;
    }
    Ok(t)
}

/// Frame size and depth of a recursive transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecursiveTransform {
    frame_size: usize,
    depth: usize,
}

impl RecursiveTransform {
    pub fn new(frame_size: usize, depth: usize) -> Result<Self> {
        if !is_power_of_two(frame_size) {
            return Err(Error::NotPowerOfTwo(frame_size));
        }
        if depth > frame_size.trailing_zeros() as usize {
            return Err(Error::InvalidPlan(format!(
                "depth {depth} needs 2^{depth} <= {frame_size}"
            )));
        }
        Ok(Self { frame_size, depth })
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Block sizes of the levels, outermost first: `N, N/2, ..., N/2^(K-1)`.
    pub fn level_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.depth).map(move |k| self.frame_size >> k)
    }

    /// Dense orthonormal matrix of the transform. Oracle use only.
    pub fn materialize(&self) -> Result<ComplexMatrix> {
        if self.frame_size > DENSE_LIMIT {
            return Err(Error::Oversize {
                size: self.frame_size,
                limit: DENSE_LIMIT,
            });
        }
        materialize_level(self.frame_size, self.depth)
    }

    /// `x = T^R s`, in `O(N)` operations per level.
    pub fn apply_forward(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(s.len())?;
        let mut buf = s.to_vec();
        // Innermost level first: each level consumes the already transformed
        // first half of its block.
        let sizes: Vec<usize> = self.level_sizes().collect();
        for &m in sizes.iter().rev() {
            let w = build_mixer(m)?;
            let (lo, hi) = buf[..m].split_at_mut(m / 2);
            for ((a, b), wi) in lo.iter_mut().zip(hi.iter_mut()).zip(w.diagonal()) {
                let top = *a;
                let mixed = *b * wi;
                *a = (top + mixed) * FRAC_1_SQRT_2;
                *b = (top - mixed) * FRAC_1_SQRT_2;
            }
        }
        Ok(buf)
    }

    /// `s = (T^R)^H y`, the exact adjoint of [`apply_forward`](Self::apply_forward).
    pub fn apply_inverse(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(y.len())?;
        let mut buf = y.to_vec();
        for m in self.level_sizes() {
            let w = build_mixer(m)?;
            let (lo, hi) = buf[..m].split_at_mut(m / 2);
            for ((a, b), wi) in lo.iter_mut().zip(hi.iter_mut()).zip(w.diagonal()) {
                let (top, bottom) = (*a, *b);
                *a = (top + bottom) * FRAC_1_SQRT_2;
                *b = wi.conj() * (top - bottom) * FRAC_1_SQRT_2;
            }
        }
        Ok(buf)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.frame_size {
            return Err(Error::LengthMismatch {
                expected: self.frame_size,
                got: len,
            });
        }
        Ok(())
    }
}

fn materialize_level(m: usize, depth: usize) -> Result<ComplexMatrix> {
    if depth == 0 {
        return Ok(ComplexMatrix::identity(m));
    }
    let t = materialize_t(m, &build_mixer(m)?)?;
    let inner = materialize_level(m / 2, depth - 1)?;
    Ok(t.matmul(&ComplexMatrix::block_diag(&[
        &inner,
        &ComplexMatrix::identity(m / 2),
    ])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{inner, max_abs_diff, norm2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn orthonormality_error(g: &ComplexMatrix) -> f64 {
        g.adjoint()
            .matmul(g)
            .max_abs_diff(&ComplexMatrix::identity(g.rows()))
    }

    #[test]
    fn mixer_examples() {
        let e = Complex64::from_polar(1.0, PI / 4.0);
        let j = c(0.0, 1.0);
        let w8 = build_mixer(8).unwrap();
        assert!(max_abs_diff(w8.diagonal(), &[c(1.0, 0.0), e, j, j * e]) < 1e-15);
        assert!(max_abs_diff(build_mixer(4).unwrap().diagonal(), &[c(1.0, 0.0), j]) < 1e-15);
        assert_eq!(build_mixer(2).unwrap().diagonal(), &[c(1.0, 0.0)]);
        assert!(matches!(build_mixer(6), Err(Error::NotPowerOfTwo(6))));
        assert!(build_mixer(1).is_err());

        let mut m = 2;
        while m <= 4096 {
            let w = build_mixer(m).unwrap();
            assert!(w.diagonal().iter().all(|d| (d.norm() - 1.0).abs() < 1e-15));
            m *= 2;
        }
    }

    #[test]
    fn single_level_examples() {
        let s = FRAC_1_SQRT_2;
        let t2 = materialize_t(2, &build_mixer(2).unwrap()).unwrap();
        assert!(max_abs_diff(t2.as_slice(), &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]) < 1e-15);

        let t4 = materialize_t(4, &build_mixer(4).unwrap()).unwrap();
        let (o, z, j) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
        let expected = ComplexMatrix::from_row_major(
            4,
            4,
            vec![o, z, o, z, z, o, z, j, o, z, -o, z, z, o, z, -j],
        )
        .unwrap()
        .scale(c(s, 0.0));
        assert!(t4.max_abs_diff(&expected) < 1e-15);

        let mut m = 2;
        while m <= 256 {
            let t = materialize_t(m, &build_mixer(m).unwrap()).unwrap();
            assert!(orthonormality_error(&t) < 1e-12);
            m *= 2;
        }
        assert!(materialize_t(8, &build_mixer(4).unwrap()).is_err());
    }

    #[test]
    fn recursive_examples() {
        let g = RecursiveTransform::new(4, 0).unwrap().materialize().unwrap();
        assert_eq!(g, ComplexMatrix::identity(4));

        let g = RecursiveTransform::new(4, 1).unwrap().materialize().unwrap();
        let t4 = materialize_t(4, &build_mixer(4).unwrap()).unwrap();
        assert!(g.max_abs_diff(&t4) < 1e-15);

        let g = RecursiveTransform::new(8, 2).unwrap().materialize().unwrap();
        assert!(orthonormality_error(&g) < 1e-12);
        // The first half of s passes through T_4 before the outer level.
        let top_left = g.block(0, 0, 4, 4);
        assert!(top_left.max_abs_diff(&t4.scale(c(FRAC_1_SQRT_2, 0.0))) < 1e-15);

        assert!(matches!(
            RecursiveTransform::new(1024, 2).unwrap().materialize(),
            Err(Error::Oversize { .. })
        ));
        assert!(RecursiveTransform::new(8, 4).is_err());
        assert!(RecursiveTransform::new(12, 1).is_err());
    }

    #[test]
    fn orthonormal_for_all_depths() {
        let mut n: usize = 2;
        while n <= 256 {
            for k in 0..=n.trailing_zeros() as usize {
                let g = RecursiveTransform::new(n, k).unwrap().materialize().unwrap();
                assert!(orthonormality_error(&g) < 1e-12, "N={n} K={k}");
            }
            n *= 2;
        }
    }

    #[test]
    fn forward_examples() {
        let t = RecursiveTransform::new(2, 1).unwrap();
        let out = t.apply_forward(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(max_abs_diff(&out, &[c(SQRT_2, 0.0), c(0.0, 0.0)]) < 1e-15);
        let out = t.apply_forward(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!(max_abs_diff(&out, &[c(0.0, 0.0), c(SQRT_2, 0.0)]) < 1e-15);
        let back = t.apply_inverse(&[c(SQRT_2, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(max_abs_diff(&back, &[c(1.0, 0.0), c(1.0, 0.0)]) < 1e-15);
        assert!(matches!(
            t.apply_forward(&[c(1.0, 0.0)]),
            Err(Error::LengthMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn forward_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let t = RecursiveTransform::new(64, 3).unwrap();
        let s = random_vec(&mut rng, 64);
        let dense = t.materialize().unwrap().mul_vec(&s);
        assert!(max_abs_diff(&t.apply_forward(&s).unwrap(), &dense) < 1e-12);
    }

    #[test]
    fn round_trip_and_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let t = RecursiveTransform::new(128, 5).unwrap();
        let s = random_vec(&mut rng, 128);
        let back = t.apply_inverse(&t.apply_forward(&s).unwrap()).unwrap();
        assert!(max_abs_diff(&s, &back) < 1e-12);

        let t = RecursiveTransform::new(32, 4).unwrap();
        let u = random_vec(&mut rng, 32);
        let v = random_vec(&mut rng, 32);
        let lhs = inner(&t.apply_forward(&u).unwrap(), &v);
        let rhs = inner(&u, &t.apply_inverse(&v).unwrap());
        assert!((lhs - rhs).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn butterfly_matches_dense_and_preserves_energy(seed in any::<u64>(), log_n in 0u32..9, k_frac in 0.0f64..=1.0) {
            let n = 1usize << log_n;
            let k = (k_frac * log_n as f64).floor() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = RecursiveTransform::new(n, k).unwrap();
            let s = random_vec(&mut rng, n);
            let x = t.apply_forward(&s).unwrap();
            prop_assert!((norm2(&x) - norm2(&s)).abs() < 1e-12);
            let dense = t.materialize().unwrap();
            prop_assert!(max_abs_diff(&x, &dense.mul_vec(&s)) < 1e-12);
            prop_assert!(max_abs_diff(&t.apply_inverse(&x).unwrap(), &s) < 1e-12);
        }
    }
}
