#![allow(dead_code)]

use seqlab_core::data::{build_vocabularies, EmbeddingTable, LabelScheme, Sentence, Task, Token};
use seqlab_core::layers::{CharCnnConfig, EncoderConfig};
use seqlab_core::train::{make_toy_corpus, ModelConfig, SequenceLabelModel, TrainConfig};
use seqlab_core::Rng;

/// Small widths so finite differences over every weight stay cheap.
pub fn tiny_encoder(task: Task) -> EncoderConfig {
    EncoderConfig {
        word_dim: 6,
        char_cnn: CharCnnConfig {
            char_dim: 4,
            window: 3,
            filters: 3,
        },
        lstm_hidden: 5,
        tag_dim: 3,
        features: task.upstream().to_vec(),
        dropout: 0.5,
        train_word_embeddings: true,
    }
}

pub fn tiny_train_config(task: Task) -> TrainConfig {
    TrainConfig {
        encoder: tiny_encoder(task),
        ..TrainConfig::for_task(task)
    }
}

/// Untrained model over the toy corpus vocabulary.
pub fn tiny_model(task: Task, seed: u64) -> SequenceLabelModel {
    let (train, _) = make_toy_corpus(1);
    let mut rng = Rng::new(seed);
    let vocabs = build_vocabularies(&train, None, task);
    let table = EmbeddingTable::empty(6, &mut rng).extend_to(&vocabs.words, &mut rng);
    let config = ModelConfig {
        encoder: tiny_encoder(task),
        constrain_iob2: task.is_span(),
    };
    SequenceLabelModel::new(task, vocabs, &table, config, &mut rng).unwrap()
}

const LETTERS: &[char] = &['a', 'n', 'h', 'ô', 'ư', 'ơ', 'đ', 'N', 'L', 'é', '_', 'x', '.'];

/// Random word over a small alphabet, often unknown to any vocabulary.
pub fn random_word(rng: &mut Rng) -> String {
    let len = 1 + rng.below(6);
    (0..len).map(|_| LETTERS[rng.below(LETTERS.len())]).collect()
}

/// Random sentence with every column filled by random in-scheme labels.
pub fn random_sentence(rng: &mut Rng, len: usize) -> Sentence {
    let schemes: Vec<LabelScheme> = Task::ALL.iter().map(|&t| LabelScheme::for_task(t)).collect();
    let tokens = (0..len)
        .map(|_| {
            let mut tok = Token::new(random_word(rng));
            for (task, s) in Task::ALL.iter().zip(&schemes) {
                tok.set_tag(*task, s.label(rng.below(s.len())));
            }
            tok
        })
        .collect();
    Sentence::new(tokens)
}

/// Pipeline over toy-corpus models trained briefly with small widths.
pub fn toy_bundle() -> seqlab_core::pipeline::PipelineBundle {
    let (train, dev) = make_toy_corpus(42);
    let models: Vec<SequenceLabelModel> = Task::ALL
        .iter()
        .map(|&task| {
            let mut config = tiny_train_config(task);
            config.encoder.lstm_hidden = 16;
            config.learning_rate = 0.05;
            config.max_epochs = 20;
            seqlab_core::train::train(&train, &dev, None, task, &config).unwrap().0
        })
        .collect();
    let [pos, chunk, ner]: [SequenceLabelModel; 3] = models.try_into().unwrap();
    seqlab_core::pipeline::PipelineBundle::new(pos, chunk, ner).unwrap()
}
