use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{ParamId, ParamSet, Tape, Var};
use crate::crf::{apply_mask, iob2_mask, viterbi_decode, CrfParams, CrfVars, Iob2Mask};
use crate::data::{EmbeddingTable, LabelScheme, Sentence, Task, Vocabularies, Vocabulary};
use crate::error::{Error, Result};
use crate::layers::{Encoder, EncoderConfig, EncoderInput};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Architecture settings stored alongside the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub constrain_iob2: bool,
}

impl ModelConfig {
    /// Short hex digest of the serialized configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct CrfIds {
    pub transitions: ParamId,
    pub start: ParamId,
    pub end: ParamId,
}

/// Everything needed to tag one task: vocabularies, encoder, CRF.
#[derive(Clone, Debug)]
pub struct SequenceLabelModel {
    task: Task,
    scheme: LabelScheme,
    words: Vocabulary,
    chars: Vocabulary,
    config: ModelConfig,
    pub(crate) params: ParamSet,
    pub(crate) encoder: Encoder,
    pub(crate) crf: CrfIds,
    mask: Option<Iob2Mask>,
}

impl SequenceLabelModel {
    /// Fresh model. `words` must already cover the word vocabulary.
    pub fn new(
        task: Task,
        vocabs: Vocabularies,
        words: &EmbeddingTable,
        config: ModelConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        if vocabs.labels.task() != task {
            return Err(Error::TaskMismatch {
                expected: task,
                found: vocabs.labels.task(),
            });
        }
        if config.encoder.features != task.upstream() {
            return Err(Error::Config(format!(
                "{task} models take tag features {:?}, got {:?}",
                task.upstream(),
                config.encoder.features
            )));
        }
        let l = vocabs.labels.len();
        let mut params = ParamSet::new();
        let encoder = Encoder::init(&mut params, config.encoder.clone(), words, vocabs.chars.len(), l, rng)?;
        let transitions = crate::layers::glorot(&mut params, "crf.transitions", l, l, rng);
        let start = params.add("crf.start", Tensor::zeros(&[l]));
        let end = params.add("crf.end", Tensor::zeros(&[l]));
        let mask = if config.constrain_iob2 {
            Some(iob2_mask(&vocabs.labels)?)
        } else {
            None
        };
        let mut model = SequenceLabelModel {
            task,
            scheme: vocabs.labels,
            words: vocabs.words,
            chars: vocabs.chars,
            config,
            params,
            encoder,
            crf: CrfIds {
                transitions,
                start,
                end,
            },
            mask,
        };
        model.enforce_constraints();
        Ok(model)
    }

    /// Reassembles a model from deserialized parts.
    pub(crate) fn from_parts(
        task: Task,
        words: Vocabulary,
        chars: Vocabulary,
        config: ModelConfig,
        params: ParamSet,
    ) -> Result<Self> {
        let scheme = LabelScheme::for_task(task);
        let encoder = Encoder::bind(&params, config.encoder.clone())?;
        let find = |name: &str| {
            params
                .find(name)
                .ok_or_else(|| Error::Container(format!("missing parameter `{name}`")))
        };
        let crf = CrfIds {
            transitions: find("crf.transitions")?,
            start: find("crf.start")?,
            end: find("crf.end")?,
        };
        let mask = if config.constrain_iob2 {
            Some(iob2_mask(&scheme)?)
        } else {
            None
        };
        let model = SequenceLabelModel {
            task,
            scheme,
            words,
            chars,
            config,
            params,
            encoder,
            crf,
            mask,
        };
        model.check_consistency()?;
        Ok(model)
    }

    fn check_consistency(&self) -> Result<()> {
        let l = self.scheme.len();
        let shape = |id: ParamId| self.params.value(id).shape().to_vec();
        let expect = [
            (self.encoder.projection_bias, vec![l]),
            (self.crf.transitions, vec![l, l]),
            (self.crf.start, vec![l]),
            (self.crf.end, vec![l]),
            (
                self.encoder.word_embedding,
                vec![self.words.len(), self.config.encoder.word_dim],
            ),
            (
                self.encoder.char_cnn.embedding,
                vec![self.chars.len(), self.config.encoder.char_cnn.char_dim],
            ),
        ];
        for (id, want) in expect {
            if shape(id) != want {
                return Err(Error::Container(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    self.params.get(id).name,
                    shape(id),
                    want
                )));
            }
        }
        if !self.params.all_finite() {
            return Err(Error::Container("non-finite weights".into()));
        }
        Ok(())
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    pub fn word_vocab(&self) -> &Vocabulary {
        &self.words
    }

    pub fn char_vocab(&self) -> &Vocabulary {
        &self.chars
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> String {
        self.config.fingerprint()
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Upstream tasks this model expects tags for.
    pub fn features(&self) -> &[Task] {
        &self.config.encoder.features
    }

    pub fn crf_params(&self) -> CrfParams {
        CrfParams {
            transitions: self.params.value(self.crf.transitions).clone(),
            start: self.params.value(self.crf.start).clone(),
            end: self.params.value(self.crf.end).clone(),
        }
    }

    pub fn crf_vars(&self, tape: &mut Tape) -> CrfVars {
        CrfVars {
            transitions: tape.param(self.crf.transitions),
            start: tape.param(self.crf.start),
            end: tape.param(self.crf.end),
        }
    }

    /// Re-pins IOB2-forbidden CRF scores after a parameter update.
    pub fn enforce_constraints(&mut self) {
        if let Some(mask) = &self.mask {
            let mut trans = self.params.value(self.crf.transitions).clone();
            let mut start = self.params.value(self.crf.start).clone();
            apply_mask(&mut trans, &mut start, mask);
            *self.params.value_mut(self.crf.transitions) = trans;
            *self.params.value_mut(self.crf.start) = start;
        }
    }

    /// Rounds every weight to the nearest `f32`, the precision of the
    /// model container.
    pub fn round_to_f32(&mut self) {
        let ids: Vec<ParamId> = self.params.ids().collect();
        for id in ids {
            for v in self.params.value_mut(id).data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }

    /// Encoder input from words and one label sequence per upstream task.
    pub fn input<W: AsRef<str>, L: AsRef<str>>(&self, words: &[W], upstream: &[Vec<L>]) -> Result<EncoderInput> {
        let features = self.features();
        if upstream.len() != features.len() {
            return Err(Error::FeatureArity {
                expected: features.len(),
                found: upstream.len(),
            });
        }
        let mut tags = Vec::with_capacity(features.len());
        for (&task, labels) in features.iter().zip(upstream) {
            let scheme = LabelScheme::for_task(task);
            let ids = labels
                .iter()
                .map(|l| {
                    scheme.index_of(l.as_ref()).ok_or_else(|| Error::UnknownLabel {
                        task,
                        label: l.as_ref().to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            tags.push(ids);
        }
        let words: Vec<&str> = words.iter().map(AsRef::as_ref).collect();
        Ok(EncoderInput::new(&words, tags, &self.words, &self.chars))
    }

    /// Encoder input using the gold upstream columns of a corpus sentence.
    pub fn input_from_sentence(&self, sentence: &Sentence) -> Result<EncoderInput> {
        let upstream = self
            .features()
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                sentence.tags(t).ok_or(Error::MissingColumn {
                    sentence: i,
                    column: t.name(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.input(&sentence.words(), &upstream)
    }

    /// Gold label ids of the task column, normalized to IOB2 for span
    /// tasks.
    pub fn gold_ids(&self, sentence: &Sentence) -> Result<Vec<usize>> {
        let labels = sentence.tags(self.task).ok_or(Error::MissingColumn {
            sentence: 0,
            column: self.task.name(),
        })?;
        let labels: Vec<String> = if self.task.is_span() {
            crate::eval::to_iob2(&labels, &self.scheme)?
        } else {
            labels.iter().map(|s| s.to_string()).collect()
        };
        labels
            .iter()
            .map(|l| {
                self.scheme.index_of(l).ok_or_else(|| Error::UnknownLabel {
                    task: self.task,
                    label: l.clone(),
                })
            })
            .collect()
    }

    pub fn emissions(&self, input: &EncoderInput) -> Result<Tensor> {
        self.encoder.encode(&self.params, input)
    }

    /// Taped negative log-likelihood of `gold`, with dropout when `dropout`
    /// carries an Rng.
    pub fn loss(
        &self,
        tape: &mut Tape,
        input: &EncoderInput,
        gold: &[usize],
        dropout: Option<&mut Rng>,
    ) -> Result<Var> {
        let emissions = self.encoder.emissions(tape, input, dropout)?;
        let crf = self.crf_vars(tape);
        crf.nll(tape, emissions, gold)
    }

    /// Viterbi label ids and path score.
    pub fn decode(&self, input: &EncoderInput) -> Result<(Vec<usize>, f64)> {
        let e = self.emissions(input)?;
        viterbi_decode(&e, &self.crf_params())
    }

    /// Predicted label strings for one sentence.
    pub fn predict<W: AsRef<str>, L: AsRef<str>>(&self, words: &[W], upstream: &[Vec<L>]) -> Result<Vec<String>> {
        let input = self.input(words, upstream)?;
        let (ids, _) = self.decode(&input)?;
        Ok(ids.into_iter().map(|i| self.scheme.label(i).to_string()).collect())
    }
}
