//! Generative regularisers for linear inverse problems.
//!
//! This crate trains small generative models (autoencoder, variational
//! autoencoder, Wasserstein GAN with gradient penalty) on synthetic and
//! standard image datasets, then uses them as regularisers for linear
//! inverse problems: deconvolution, compressed sensing and parallel-beam
//! tomography. It ships the reconstruction methods built on top of them
//! (range-restricted, relaxed, sparse-deviation and sparse-TV), classical
//! Tikhonov and total-variation baselines, and an evaluation suite for
//! generator quality.
//!
//! The narrative guide in `book/` walks through each subsystem; its code
//! snippets compile as doc-tests (see the `book_guide` module at the
//! bottom of this file).

pub mod autodiff;
pub mod datasets;
pub mod models;
pub mod operators;
pub mod error;
pub mod eval;
pub mod io;
pub mod rng;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
