use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::layers::EncoderConfig;

/// Optimization settings. Every numeric default here is a choice of this
/// crate, surfaced so it can be overridden from the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Effective rate at epoch `e` (0-based) is `learning_rate / (1 + lr_decay·e)`.
    pub lr_decay: f64,
    /// Maximum global L2 norm of the gradient.
    pub gradient_clip: f64,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub encoder: EncoderConfig,
    /// Pin IOB2-invalid CRF transitions for span tasks.
    pub constrain_iob2: bool,
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        TrainConfig {
            learning_rate: 0.01,
            lr_decay: 0.05,
            gradient_clip: 5.0,
            max_epochs: 100,
            patience: 10,
            seed: 42,
            encoder: EncoderConfig::for_task(task),
            constrain_iob2: task.is_span(),
        }
    }

    pub fn dropout(&self) -> f64 {
        self.encoder.dropout
    }

    // Negated comparisons so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.lr_decay < 0.0 || !(self.gradient_clip > 0.0) {
            return Err(Error::Config(
                "learning rate and clip norm must be positive, decay non-negative".into(),
            ));
        }
        if self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config("patience and max_epochs must be at least 1".into()));
        }
        self.encoder.validate()
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + self.lr_decay * epoch as f64)
    }
}
