//! Encoder layers: character CNN, bidirectional LSTM, tag-feature
//! embeddings and the emission projection.

pub mod char_cnn;
pub mod dropout;
pub mod encoder;
pub mod lstm;

pub use char_cnn::{CharCnn, CharCnnConfig};
pub use dropout::apply_dropout;
pub use encoder::{Encoder, EncoderConfig, EncoderInput};
pub use lstm::{LstmCell, LstmState};

use crate::autodiff::{ParamId, ParamSet};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Adds a `[rows, cols]` matrix drawn from `U(±√(6/(rows+cols)))`.
pub(crate) fn glorot(params: &mut ParamSet, name: &str, rows: usize, cols: usize, rng: &mut Rng) -> ParamId {
    glorot_blocks(params, name, rows, cols, 1, rng)
}

/// Glorot init for `blocks` matrices of `[rows, cols / blocks]` stored side
/// by side, each scaled by its own fan-in and fan-out.
pub(crate) fn glorot_blocks(
    params: &mut ParamSet,
    name: &str,
    rows: usize,
    cols: usize,
    blocks: usize,
    rng: &mut Rng,
) -> ParamId {
    let bound = (6.0 / (rows + cols / blocks) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform(bound)).collect();
    params.add(name, Tensor::matrix(rows, cols, data).expect("positive extents"))
}

/// Adds a `[rows, dim]` embedding table drawn from `U(±√(3/dim))`.
pub(crate) fn embedding(params: &mut ParamSet, name: &str, rows: usize, dim: usize, rng: &mut Rng) -> ParamId {
    let bound = crate::data::embeddings::init_bound(dim);
    let data = (0..rows * dim).map(|_| rng.uniform(bound)).collect();
    params.add(name, Tensor::matrix(rows, dim, data).expect("positive extents"))
}
