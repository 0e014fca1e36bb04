//! Learning binary classifiers from n-tuples that contain exactly m positive
//! instances (NTMP).
//!
//! The crate is `no_std` with `alloc`. It contains everything that is pure
//! computation: surrogate losses, the synthetic data model and tuple
//! construction, the unbiased risk estimator and its clamped variants,
//! scorers and the training loop, class-prior estimation, the evaluation and
//! statistics stack, and the comparison baselines. File formats and the
//! command line live in the `ntmp` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod baselines;
pub mod data;
pub mod datagen;
mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod prior;
pub mod risk;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
