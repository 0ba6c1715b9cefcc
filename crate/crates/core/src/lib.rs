//! Simulation core for privacy-preserving semantic communications.
//!
//! An image encoder maps each image to `d` complex channel uses, the signal
//! crosses a Rayleigh block-fading AWGN channel, and a multi-task receiver
//! classifies and reconstructs it. An eavesdropper classifier observes the
//! same transmission over its own channel. The crate trains the legitimate
//! pair with or without an adversarial privacy term, trains best-response
//! eavesdroppers, crafts cooperative-jammer perturbations (FGSM/PGD) and
//! evaluates accuracy, PSNR, SSIM and the legitimate-vs-eavesdropper gap.
//!
//! Everything here is pure computation driven by explicit random streams and
//! builds without `std` (with `alloc`). The default `std` feature only
//! enables runtime CPU dispatch in the matrix kernels.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod config;
pub mod data;
mod error;
pub mod evaluation;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod perturbation;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::Error;
pub use rand;
pub use tensor::{Real, Tensor};

pub type Result<T, E = Error> = core::result::Result<T, E>;
