//! Model definition, training loop and the on-disk container.

mod config;
mod container;
mod model;
mod toy;
mod trainer;

pub use config::TrainConfig;
pub use container::{load_model, load_model_for, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION, MAGIC};
pub use model::{ModelConfig, SequenceLabelModel};
pub use toy::{make_toy_corpus, TOY_LEXICON};
pub use trainer::{evaluate_model, train, train_with, EpochRecord, TrainHistory};
