//! Channel construction: tapped-delay-line profiles, sampled impulse
//! responses, circulant channels and the polarized children produced by one
//! application of the transform.

mod circulant;
mod profile;

pub use circulant::{
    appendix_a_subblocks, circular_complement, lower_toeplitz, AppendixABlocks, CirculantChannel,
};
pub use profile::{sample_cir, ChannelImpulseResponse, ChannelProfile};
