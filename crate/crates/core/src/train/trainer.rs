use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Tape};
use crate::data::{build_vocabularies, EmbeddingTable, Sentence, Task};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::layers::EncoderInput;
use crate::rng::Rng;
use crate::train::config::TrainConfig;
use crate::train::model::{ModelConfig, SequenceLabelModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sentence negative log-likelihood.
    pub train_loss: f64,
    pub dev_metric: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub stopped_early: bool,
}

/// Scores `model` on `sentences` using their gold upstream columns.
pub fn evaluate_model(model: &SequenceLabelModel, sentences: &[Sentence]) -> Result<EvalReport> {
    let mut gold = Vec::with_capacity(sentences.len());
    let mut pred = Vec::with_capacity(sentences.len());
    for (i, s) in sentences.iter().enumerate() {
        let labels = s.tags(model.task()).ok_or(Error::MissingColumn {
            sentence: i,
            column: model.task().name(),
        })?;
        let input = model.input_from_sentence(s)?;
        let (ids, _) = model.decode(&input)?;
        gold.push(labels.iter().map(|l| l.to_string()).collect::<Vec<_>>());
        pred.push(ids.into_iter().map(|i| model.scheme().label(i).to_string()).collect());
    }
    evaluate(&gold, &pred, model.scheme())
}

/// Trains with the task's headline dev metric (span F1, or accuracy for
/// POS) driving early stopping.
pub fn train(
    train: &[Sentence],
    dev: &[Sentence],
    embeddings: Option<&EmbeddingTable>,
    task: Task,
    config: &TrainConfig,
) -> Result<(SequenceLabelModel, TrainHistory)> {
    if dev.is_empty() {
        return Err(Error::EmptySet("development set"));
    }
    train_with(train, embeddings, task, config, |m| {
        Ok(evaluate_model(m, dev)?.headline())
    })
}

/// Per-sentence SGD with a caller-supplied dev metric (higher is better).
///
/// The metric is computed on a copy of the weights rounded to `f32`, and
/// that copy is what is returned for the best epoch, so a saved and
/// reloaded model scores exactly as it did during training. Among epochs
/// tied on the metric the latest is kept.
pub fn train_with<F>(
    train: &[Sentence],
    embeddings: Option<&EmbeddingTable>,
    task: Task,
    config: &TrainConfig,
    mut dev_metric: F,
) -> Result<(SequenceLabelModel, TrainHistory)>
where
    F: FnMut(&SequenceLabelModel) -> Result<f64>,
{
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptySet("training set"));
    }
    let root = Rng::new(config.seed);
    let mut init_rng = root.fork(1);
    let mut order_rng = root.fork(2);
    let mut dropout_rng = root.fork(3);

    let mut encoder = config.encoder.clone();
    if let Some(e) = embeddings {
        if e.dim() != encoder.word_dim {
            info!("using {}-dimensional word vectors from the embedding file", e.dim());
            encoder.word_dim = e.dim();
        }
    }
    let vocabs = build_vocabularies(train, embeddings, task);
    let table = match embeddings {
        Some(e) => e.extend_to(&vocabs.words, &mut init_rng),
        None => EmbeddingTable::empty(encoder.word_dim, &mut init_rng).extend_to(&vocabs.words, &mut init_rng),
    };
    let model_config = ModelConfig {
        encoder,
        constrain_iob2: config.constrain_iob2,
    };
    let mut model = SequenceLabelModel::new(task, vocabs, &table, model_config, &mut init_rng)?;
    info!(
        "{task}: {} sentences, {} words, {} chars, {} labels",
        train.len(),
        model.word_vocab().len(),
        model.char_vocab().len(),
        model.scheme().len()
    );

    let examples: Vec<(EncoderInput, Vec<usize>)> = train
        .iter()
        .map(|s| Ok((model.input_from_sentence(s)?, model.gold_ids(s)?)))
        .collect::<Result<_>>()?;
    let dropout = model.config().encoder.dropout > 0.0;

    let mut history = TrainHistory {
        best_metric: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut best: Option<SequenceLabelModel> = None;
    let mut since_best = 0;
    let mut grads = Gradients::new(model.params());
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 1..=config.max_epochs {
        let rate = config.learning_rate_at(epoch - 1);
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        for &i in &order {
            let (input, gold) = &examples[i];
            grads.zero();
            let loss = {
                let mut tape = Tape::new(model.params());
                let rng = if dropout { Some(&mut dropout_rng) } else { None };
                let loss = model.loss(&mut tape, input, gold, rng)?;
                let value = tape.value(loss).item();
                if !value.is_finite() {
                    return Err(Error::NanLoss { epoch, sentence: i });
                }
                tape.backward(loss, &mut grads)?;
                value
            };
            if !grads.all_finite() {
                return Err(Error::NanLoss { epoch, sentence: i });
            }
            grads.clip_norm(config.gradient_clip);
            model.params_mut().sgd_step(&grads, rate);
            model.enforce_constraints();
            total += loss;
        }

        let mut snapshot = model.clone();
        snapshot.round_to_f32();
        let metric = dev_metric(&snapshot)?;
        let train_loss = total / examples.len() as f64;
        info!("epoch {epoch}: loss {train_loss:.4}, dev {metric:.2}, lr {rate:.5}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev_metric: metric,
            learning_rate: rate,
        });
        // A tie replaces the kept snapshot but does not reset patience.
        let improved = best.is_none() || metric > history.best_metric;
        if improved || metric == history.best_metric {
            history.best_metric = metric;
            history.best_epoch = epoch;
            best = Some(snapshot);
        }
        if improved {
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                debug!("no improvement for {since_best} epochs");
                history.stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    let model = best.expect("at least one epoch ran");
    Ok((model, history))
}
