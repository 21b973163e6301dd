use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("non-positive pivot {value:e} at index {index}; matrix is numerically singular")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("channel has {taps} taps but at most {max} are allowed here")]
    TapsTooLong { taps: usize, max: usize },

    #[error("size {0} must be even")]
    OddSize(usize),

    #[error("size {size} exceeds the dense limit {limit}")]
    Oversize { size: usize, limit: usize },

    #[error("invalid slice plan: {0}")]
    InvalidPlan(String),

    #[error("cyclic prefix of {cp} samples is shorter than the channel ({taps} taps)")]
    CyclicPrefixTooShort { cp: usize, taps: usize },

    #[error("zero diagonal entry at index {0}; triangular system is singular")]
    SingularTriangular(usize),

    #[error("matrix is not lower triangular")]
    NotLowerTriangular,

    #[error("invalid channel profile: {0}")]
    InvalidProfile(String),

    #[error("invalid SNR: {0}")]
    InvalidSnr(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empirical cdf needs at least one sample")]
    EmptySamples,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
