#![allow(dead_code)]

use seqlab_core::data::{build_vocabularies, EmbeddingTable, Task};
use seqlab_core::layers::{CharCnnConfig, EncoderConfig};
use seqlab_core::pipeline::PipelineBundle;
use seqlab_core::train::{make_toy_corpus, ModelConfig, SequenceLabelModel};
use seqlab_core::Rng;

pub fn small_encoder(task: Task) -> EncoderConfig {
    EncoderConfig {
        word_dim: 8,
        char_cnn: CharCnnConfig {
            char_dim: 4,
            window: 3,
            filters: 4,
        },
        lstm_hidden: 8,
        tag_dim: 3,
        features: task.upstream().to_vec(),
        dropout: 0.5,
        train_word_embeddings: true,
    }
}

/// Randomly initialised models over the toy vocabulary; enough to exercise
/// every code path of the service without training.
pub fn untrained_bundle(seed: u64) -> PipelineBundle {
    let (train, _) = make_toy_corpus(1);
    let mut rng = Rng::new(seed);
    let mut model = |task: Task| {
        let vocabs = build_vocabularies(&train, None, task);
        let table = EmbeddingTable::empty(8, &mut rng).extend_to(&vocabs.words, &mut rng);
        let config = ModelConfig {
            encoder: small_encoder(task),
            constrain_iob2: task.is_span(),
        };
        SequenceLabelModel::new(task, vocabs, &table, config, &mut rng).unwrap()
    };
    let (pos, chunk, ner) = (model(Task::Pos), model(Task::Chunk), model(Task::Ner));
    PipelineBundle::new(pos, chunk, ner).unwrap()
}
