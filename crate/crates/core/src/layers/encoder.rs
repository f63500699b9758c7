use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamSet, Tape, Var};
use crate::data::{EmbeddingTable, LabelScheme, Task, Vocabulary};
use crate::error::{Error, Result};
use crate::layers::{apply_dropout, embedding, glorot, CharCnn, CharCnnConfig, LstmCell};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub word_dim: usize,
    pub char_cnn: CharCnnConfig,
    pub lstm_hidden: usize,
    /// Width of each upstream tag-feature embedding.
    pub tag_dim: usize,
    /// Upstream tasks whose tags are fed as features, in input order.
    pub features: Vec<Task>,
    pub dropout: f64,
    pub train_word_embeddings: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            word_dim: 300,
            char_cnn: CharCnnConfig::default(),
            lstm_hidden: 300,
            tag_dim: 30,
            features: Vec::new(),
            dropout: 0.5,
            train_word_embeddings: true,
        }
    }
}

impl EncoderConfig {
    /// Default configuration for a task, with its upstream tag features.
    pub fn for_task(task: Task) -> Self {
        EncoderConfig {
            features: task.upstream().to_vec(),
            ..Default::default()
        }
    }

    pub fn input_width(&self) -> usize {
        self.word_dim + self.char_cnn.filters + self.tag_dim * self.features.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.char_cnn.validate()?;
        if self.word_dim == 0 || self.lstm_hidden == 0 || (self.tag_dim == 0 && !self.features.is_empty()) {
            return Err(Error::Config("encoder widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Parameter handles for the whole encoder.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub word_embedding: ParamId,
    pub char_cnn: CharCnn,
    pub tag_tables: Vec<ParamId>,
    pub forward: LstmCell,
    pub backward: LstmCell,
    /// `[2·hidden, labels]`; rows `0..hidden` read the forward states.
    pub projection: ParamId,
    pub projection_bias: ParamId,
}

/// A sentence converted to vocabulary ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderInput {
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
    /// One id sequence per configured tag feature.
    pub tags: Vec<Vec<usize>>,
}

impl EncoderInput {
    pub fn new(words: &[&str], tags: Vec<Vec<usize>>, word_vocab: &Vocabulary, char_vocab: &Vocabulary) -> Self {
        let mut buf = [0u8; 4];
        EncoderInput {
            words: words.iter().map(|w| word_vocab.get_word(w)).collect(),
            chars: words
                .iter()
                .map(|w| w.chars().map(|c| char_vocab.get(c.encode_utf8(&mut buf))).collect())
                .collect(),
            tags,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Encoder {
    /// Registers all encoder parameters in `params`. The word embedding is
    /// initialized from `words`, whose width must equal `config.word_dim`.
    pub fn init(
        params: &mut ParamSet,
        config: EncoderConfig,
        words: &EmbeddingTable,
        num_chars: usize,
        num_labels: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        if words.dim() != config.word_dim {
            return Err(Error::Config(format!(
                "word embeddings are {}-dimensional, encoder expects {}",
                words.dim(),
                config.word_dim
            )));
        }
        let word_embedding = params.add("word.embedding", words.matrix().clone());
        params.set_trainable(word_embedding, config.train_word_embeddings);
        let char_cnn = CharCnn::init(params, config.char_cnn.clone(), num_chars, rng)?;
        let tag_tables = config
            .features
            .iter()
            .map(|&t| {
                let n = LabelScheme::for_task(t).len();
                embedding(params, &format!("tag.{t}"), n, config.tag_dim, rng)
            })
            .collect();
        let input = config.input_width();
        let hidden = config.lstm_hidden;
        let forward = LstmCell::init(params, "lstm.forward", input, hidden, rng);
        let backward = LstmCell::init(params, "lstm.backward", input, hidden, rng);
        let projection = glorot(params, "projection.w", 2 * hidden, num_labels, rng);
        let projection_bias = params.add("projection.b", Tensor::zeros(&[num_labels]));
        Ok(Encoder {
            config,
            word_embedding,
            char_cnn,
            tag_tables,
            forward,
            backward,
            projection,
            projection_bias,
        })
    }

    /// Re-binds handles to an existing parameter set by name.
    pub fn bind(params: &ParamSet, config: EncoderConfig) -> Result<Self> {
        let find = |name: &str| {
            params
                .find(name)
                .ok_or_else(|| Error::Container(format!("missing parameter `{name}`")))
        };
        let lstm = |prefix: &str, input: usize| -> Result<LstmCell> {
            Ok(LstmCell {
                input,
                hidden: config.lstm_hidden,
                w_x: find(&format!("{prefix}.w_x"))?,
                w_h: find(&format!("{prefix}.w_h"))?,
                bias: find(&format!("{prefix}.bias"))?,
            })
        };
        let input = config.input_width();
        let encoder = Encoder {
            word_embedding: find("word.embedding")?,
            char_cnn: CharCnn {
                config: config.char_cnn.clone(),
                embedding: find("char.embedding")?,
                filters: find("char.filters")?,
                bias: find("char.bias")?,
            },
            tag_tables: config
                .features
                .iter()
                .map(|t| find(&format!("tag.{t}")))
                .collect::<Result<_>>()?,
            forward: lstm("lstm.forward", input)?,
            backward: lstm("lstm.backward", input)?,
            projection: find("projection.w")?,
            projection_bias: find("projection.b")?,
            config,
        };
        Ok(encoder)
    }

    pub fn num_labels(&self, params: &ParamSet) -> usize {
        params.value(self.projection_bias).len()
    }

    /// Per-token input rows `[T, input_width]`: word ⊕ char features ⊕ tags.
    pub fn inputs(&self, tape: &mut Tape, input: &EncoderInput) -> Result<Var> {
        if input.tags.len() != self.tag_tables.len() {
            return Err(Error::FeatureArity {
                expected: self.tag_tables.len(),
                found: input.tags.len(),
            });
        }
        if input.is_empty() {
            return Err(Error::EmptySet("sentence"));
        }
        let words = tape.param(self.word_embedding);
        let mut parts = vec![tape.gather_rows(words, &input.words)?];
        let char_feats = input
            .chars
            .iter()
            .map(|ids| {
                let ids: &[usize] = if ids.is_empty() { &[crate::data::UNK] } else { ids };
                self.char_cnn.features(tape, ids)
            })
            .collect::<Result<Vec<_>>>()?;
        parts.push(tape.stack(&char_feats)?);
        for (table, ids) in self.tag_tables.iter().zip(&input.tags) {
            if ids.len() != input.len() {
                return Err(Error::Length {
                    left: ids.len(),
                    right: input.len(),
                });
            }
            let t = tape.param(*table);
            parts.push(tape.gather_rows(t, ids)?);
        }
        tape.concat(&parts, 1)
    }

    /// Emission scores `[T, labels]`. Dropout is applied to the encoder
    /// input and to the Bi-LSTM output when `dropout` carries an Rng.
    pub fn emissions(&self, tape: &mut Tape, input: &EncoderInput, mut dropout: Option<&mut Rng>) -> Result<Var> {
        let rate = self.config.dropout;
        let mut x = self.inputs(tape, input)?;
        if let Some(rng) = dropout.as_deref_mut() {
            x = apply_dropout(tape, x, rate, rng, true)?;
        }
        let fwd_in = self.forward.project_inputs(tape, x)?;
        let bwd_in = self.backward.project_inputs(tape, x)?;
        let fwd = self.forward.run(tape, fwd_in, false)?;
        let bwd = self.backward.run(tape, bwd_in, true)?;
        let fwd = tape.stack(&fwd)?;
        let bwd = tape.stack(&bwd)?;
        let mut hidden = tape.concat(&[fwd, bwd], 1)?;
        if let Some(rng) = dropout {
            hidden = apply_dropout(tape, hidden, rate, rng, true)?;
        }
        let w = tape.param(self.projection);
        let b = tape.param(self.projection_bias);
        let scores = tape.matmul(hidden, w)?;
        tape.add(scores, b)
    }

    /// Inference-mode emission scores as a plain tensor.
    pub fn encode(&self, params: &ParamSet, input: &EncoderInput) -> Result<Tensor> {
        let mut tape = Tape::new(params);
        let e = self.emissions(&mut tape, input, None)?;
        Ok(tape.value(e).clone())
    }
}
