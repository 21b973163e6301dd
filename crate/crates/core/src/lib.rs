//! Physical-layer slicing of OFDM symbols.
//!
//! An orthonormal polarization transform is applied after the per-slice IDFT so
//! that one OFDM symbol (one cyclic prefix) carries several slices, each seeing
//! its own circulant sub-channel with a ranked mutual information and decode
//! cost. The crate covers:
//!
//! - [`spectral`]: unitary radix-2 DFT, dense complex matrices, log-determinants
//! - [`channel`]: tapped-delay-line profiles, circulant channels and their
//!   positive/negative polarized children
//! - [`transform`]: the mixer, the dense and butterfly forms of the recursive transform
//! - [`plan`]: slice trees, bin sets and decode-cost accounting
//! - [`mi`]: per-slice mutual information and split reports
//! - [`txrx`]: the transmit/propagate/receive chain and the direct decoder
//! - [`experiment`]: Monte-Carlo scenarios, empirical cdfs and CSV output

pub mod channel;
pub mod error;
pub mod experiment;
pub mod mi;
pub mod plan;
pub mod spectral;
pub mod transform;
pub mod txrx;

pub use error::{Error, Result};
pub use num_complex::Complex64;
