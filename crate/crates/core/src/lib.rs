//! Neural sequence labeling for POS tagging, chunking and named-entity
//! recognition: a character CNN and pre-trained word embeddings feed a
//! bidirectional LSTM whose per-token scores are decoded by a linear-chain
//! CRF. The three task models are chained into an annotation pipeline.

#![allow(clippy::needless_range_loop)]

pub mod autodiff;
pub mod crf;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod layers;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::Tensor;
