//! Unsourced random access over the single-antenna quasi-static Rayleigh fading MAC.
//!
//! The crate bundles a link-level simulator (LDPC codes, Gaussian-mixture fading
//! posteriors, an alternating belief-propagation joint decoder inside T-fold ALOHA)
//! together with finite-blocklength and asymptotic energy-per-bit bounds.

pub mod aloha;
pub mod asymptotic;
pub mod channel;
pub mod error;
pub mod fbl;
pub mod gm;
pub mod harness;
pub mod joint;
pub mod ldpc;
pub mod numerics;
pub mod rng;
pub mod subspace;

pub use error::{Error, Result};
