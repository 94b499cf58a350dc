//! Deep probabilistic sub-sampling (DPS) for partial Fourier measurements.
//!
//! A trainable categorical distribution per measurement slot selects which
//! Fourier coefficients of a K-sparse signal are observed. Hard samples are
//! drawn with the Gumbel-max trick without replacement, and gradients reach
//! the logits through a temperature-annealed softmax relaxation
//! (straight-through estimator). The observed coefficients are decoded by a
//! three-fold unrolled LISTA network trained jointly with the logits; ISTA is
//! provided as the classical baseline.
//!
//! Module map:
//!
//! - [`signals`]: K-sparse signal generation, unitary DFT, persisted test sets
//! - [`dps`]: logits, Gumbel sampling, masks, soft rows and their gradients
//! - [`reconstruction`]: sensing matrices, ISTA, LISTA forward/backward
//! - [`training`]: loss, Adam, temperature schedule, the training loop
//! - [`analysis`]: evaluation, RIP rank checks, timing, exports, grating lobes

pub mod analysis;
pub mod checkpoint;
pub mod dps;
pub mod error;
pub mod gradcheck;
pub mod plot;
pub mod reconstruction;
pub mod signals;
pub mod streams;
pub mod training;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type Complex = rustfft::num_complex::Complex64;
