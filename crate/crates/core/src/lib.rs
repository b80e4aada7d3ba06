//! Sensitivity and block sensitivity of Boolean functions and of sequence
//! classification tasks.
//!
//! The crate is split by workflow:
//!
//! * [`boolfn`] holds exact computations on truth tables over `{-1,1}^n`:
//!   pointwise and subset sensitivity, block sensitivity via subset-mask
//!   dynamic programming, the Walsh–Hadamard transform, and function samplers.
//! * [`seqsens`] estimates block sensitivity of arbitrary sequence classifiers
//!   through pluggable neighbor-sampler and task-model oracles, including the
//!   newline-delimited JSON wire protocol for external oracles.
//! * [`linbound`] builds windowed averaging models and certifies their
//!   block-sensitivity bound by exhaustive enumeration.
//! * [`rnnlab`] is a small LSTM with backpropagation through time and Adam,
//!   used to measure the sensitivity bias of recurrent networks.
//! * [`stats`] provides the correlation, regression and histogram helpers the
//!   experiments report.

pub mod boolfn;
pub mod error;
pub mod linbound;
pub mod rng;
pub mod rnnlab;
pub mod seqsens;
pub mod stats;

pub use error::{Error, Result};
