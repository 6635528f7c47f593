//! Neural networks whose weights are learned one bit at a time.
//!
//! Every weight of a quantized layer is rebuilt from `k` sign-and-magnitude
//! bit planes, each driven by a real-valued virtual bit. Training updates
//! the virtual bits through a straight-through estimator, so any subset of
//! planes can be trained or frozen. On top of that representation the
//! crate provides:
//!
//! - [`bits`]: the bit-plane codec, exponent-offset search and initialization
//! - [`engine`]: dense/conv layers, backprop, Adam, LR schedule
//! - [`data`]: MNIST IDX and CIFAR-10 binary readers, deterministic batching
//! - [`trainer`]: training runs, sweeps, sparsity, histograms, integer folding
//! - [`analysis`]: low-order bit perturbation of conventionally trained nets
//! - [`stego`]: payloads carried in frozen bit planes
//! - [`model_io`]: the on-disk model formats
//! - [`cli`]: the `bitwise` command line

pub mod analysis;
pub mod bits;
pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod model_io;
mod real;
pub mod stego;
pub mod trainer;

pub use error::{Error, Result};
pub use real::Real;
