//! A self-contained convolutional-network engine for four-class blood cell
//! image classification: forward propagation, hand-derived backpropagation,
//! mini-batch SGD with dropout, dataset ingestion and confusion-matrix
//! evaluation, all in 64-bit floats with seed-deterministic behavior.

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod optim;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use network::{build_model, Model, NetworkSpec};
pub use tensor::Tensor;
