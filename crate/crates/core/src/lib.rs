//! Joint MIMO semantic precoding and decoding for latent space alignment.
//!
//! A transmitter holds latents `s_T ∈ R^d` from one encoder, a receiver
//! expects latents `s_R ∈ R^m` from another. This crate learns a precoder
//! that compresses the paired complex latent into `K·N_T` channel symbols and
//! a decoder that maps the `K·N_R` received symbols into the receiver's
//! latent space, jointly equalizing a flat Rayleigh MIMO channel.
//!
//! Two learners are provided: a linear pair trained by scaled ADMM
//! ([`linear_eq`]) and a sparsifiable complex-valued MLP pair
//! ([`neural_eq`]). [`baselines`] implements disjoint alignment plus SVD
//! equalization for comparison, [`flops`] counts inference cost, and
//! [`evalx`] runs seeded Monte-Carlo sweeps.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod codec;
pub mod error;
pub mod evalx;
pub mod flops;
pub mod linalg;
pub mod linear_eq;
pub mod model_io;
pub mod neural_eq;
pub mod seed;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/signal_model.md")]
    mod signal_model {}
    #[doc = include_str!("../../../book/src/linear.md")]
    mod linear {}
    #[doc = include_str!("../../../book/src/neural.md")]
    mod neural {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/flops.md")]
    mod flops {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    mod sweeps {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
