use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamSet, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{embedding, glorot};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharCnnConfig {
    pub char_dim: usize,
    pub window: usize,
    pub filters: usize,
}

impl Default for CharCnnConfig {
    fn default() -> Self {
        CharCnnConfig {
            char_dim: 30,
            window: 3,
            filters: 30,
        }
    }
}

impl CharCnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window.is_multiple_of(2) || self.filters == 0 || self.char_dim == 0 {
            return Err(Error::Config(format!(
                "char CNN needs an odd window and positive widths, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Character-level word features.
///
/// The word's characters are embedded and framed by one PAD character on
/// each side (the PAD embedding is the zero vector). Filters of width
/// `window` slide over that framed sequence with `(window − 1)/2` further
/// zero rows of padding, giving `len + 2` positions, and the feature is the
/// per-filter maximum over positions.
///
/// The filter bank is stored as `[window·char_dim, filters]`, so row
/// `w·char_dim + k` holds the weight of embedding coordinate `k` at window
/// offset `w`.
#[derive(Clone, Debug)]
pub struct CharCnn {
    pub config: CharCnnConfig,
    pub embedding: ParamId,
    pub filters: ParamId,
    pub bias: ParamId,
}

impl CharCnn {
    pub fn init(params: &mut ParamSet, config: CharCnnConfig, num_chars: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let embedding = embedding(params, "char.embedding", num_chars, config.char_dim, rng);
        let filters = glorot(
            params,
            "char.filters",
            config.window * config.char_dim,
            config.filters,
            rng,
        );
        let bias = params.add("char.bias", Tensor::zeros(&[config.filters]));
        Ok(CharCnn {
            config,
            embedding,
            filters,
            bias,
        })
    }

    pub fn padding(&self) -> usize {
        1 + (self.config.window - 1) / 2
    }

    /// Feature vector `[filters]` for one word given its character ids.
    pub fn features(&self, tape: &mut Tape, char_ids: &[usize]) -> Result<Var> {
        let emb = tape.param(self.embedding);
        let chars = tape.gather_rows(emb, char_ids)?;
        let windows = tape.unfold(chars, self.config.window, self.padding())?;
        let filters = tape.param(self.filters);
        let conv = tape.matmul(windows, filters)?;
        let bias = tape.param(self.bias);
        let conv = tape.add(conv, bias)?;
        tape.max_axis(conv, 0)
    }
}
