//! The staged annotator: tokenize, then POS, chunk and NER, each stage
//! reading the predictions of the stages before it.

mod document;
mod tokenizer;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{LabelScheme, Task};
use crate::error::{Error, Result};
use crate::train::{load_model_for, save_model, SequenceLabelModel, FORMAT_VERSION};

pub use document::{AnnotatedDocument, WordRecord};
pub use tokenizer::{DefaultTokenizer, Tokenizer};

pub const BUNDLE_MANIFEST: &str = "bundle.json";
pub const BUNDLE_VERSION: u32 = 1;

/// `bundle.json`: which file holds which model, and what wrote them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub bundle_version: u32,
    pub model_format: u32,
    pub library_version: String,
    pub pos: ModelEntry,
    pub chunk: ModelEntry,
    pub ner: ModelEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub file: String,
    pub fingerprint: String,
}

fn model_file(task: Task) -> String {
    format!("{task}.model")
}

/// Three task models and a tokenizer, immutable once built.
pub struct PipelineBundle {
    tokenizer: Box<dyn Tokenizer>,
    pos: SequenceLabelModel,
    chunk: SequenceLabelModel,
    ner: SequenceLabelModel,
}

impl std::fmt::Debug for PipelineBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PipelineBundle")
            .field("pos", &self.pos.fingerprint())
            .field("chunk", &self.chunk.fingerprint())
            .field("ner", &self.ner.fingerprint())
            .finish_non_exhaustive()
    }
}

fn check_stage(model: &SequenceLabelModel, task: Task) -> Result<()> {
    if model.task() != task {
        return Err(Error::TaskMismatch {
            expected: task,
            found: model.task(),
        });
    }
    if model.features() != task.upstream() {
        return Err(Error::Bundle(format!(
            "{task} model reads tag features {:?}, the pipeline supplies {:?}",
            model.features(),
            task.upstream()
        )));
    }
    let encoder = model.encoder();
    for (&upstream, &table) in task.upstream().iter().zip(&encoder.tag_tables) {
        let rows = model.params().value(table).rows();
        let labels = LabelScheme::for_task(upstream).len();
        if rows != labels {
            return Err(Error::Bundle(format!(
                "{task} model has {rows} {upstream} tag rows, the {upstream} scheme has {labels} labels"
            )));
        }
    }
    Ok(())
}

impl PipelineBundle {
    /// Bundle with the default tokenizer.
    pub fn new(pos: SequenceLabelModel, chunk: SequenceLabelModel, ner: SequenceLabelModel) -> Result<Self> {
        Self::with_tokenizer(Box::new(DefaultTokenizer), pos, chunk, ner)
    }

    pub fn with_tokenizer(
        tokenizer: Box<dyn Tokenizer>,
        pos: SequenceLabelModel,
        chunk: SequenceLabelModel,
        ner: SequenceLabelModel,
    ) -> Result<Self> {
        check_stage(&pos, Task::Pos)?;
        check_stage(&chunk, Task::Chunk)?;
        check_stage(&ner, Task::Ner)?;
        Ok(PipelineBundle {
            tokenizer,
            pos,
            chunk,
            ner,
        })
    }

    pub fn model(&self, task: Task) -> &SequenceLabelModel {
        match task {
            Task::Pos => &self.pos,
            Task::Chunk => &self.chunk,
            Task::Ner => &self.ner,
        }
    }

    pub fn manifest(&self) -> BundleManifest {
        let entry = |task: Task| ModelEntry {
            file: model_file(task),
            fingerprint: self.model(task).fingerprint(),
        };
        BundleManifest {
            bundle_version: BUNDLE_VERSION,
            model_format: FORMAT_VERSION,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            pos: entry(Task::Pos),
            chunk: entry(Task::Chunk),
            ner: entry(Task::Ner),
        }
    }

    /// Writes `bundle.json` and one model file per task into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for task in Task::ALL {
            let file = BufWriter::new(File::create(dir.join(model_file(task)))?);
            save_model(self.model(task), file)?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest())?;
        fs::write(dir.join(BUNDLE_MANIFEST), manifest + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(BUNDLE_MANIFEST))
            .map_err(|e| Error::Bundle(format!("cannot read {}: {e}", dir.join(BUNDLE_MANIFEST).display())))?;
        let manifest: BundleManifest = serde_json::from_str(&text)?;
        if manifest.bundle_version != BUNDLE_VERSION {
            return Err(Error::Bundle(format!(
                "bundle version {} is not supported (expected {BUNDLE_VERSION})",
                manifest.bundle_version
            )));
        }
        let load = |entry: &ModelEntry, task: Task| -> Result<SequenceLabelModel> {
            let file = File::open(dir.join(&entry.file))?;
            let model = load_model_for(BufReader::new(file), task)?;
            if model.fingerprint() != entry.fingerprint {
                return Err(Error::Bundle(format!(
                    "{} has fingerprint {}, manifest says {}",
                    entry.file,
                    model.fingerprint(),
                    entry.fingerprint
                )));
            }
            Ok(model)
        };
        let pos = load(&manifest.pos, Task::Pos)?;
        let chunk = load(&manifest.chunk, Task::Chunk)?;
        let ner = load(&manifest.ner, Task::Ner)?;
        Self::new(pos, chunk, ner)
    }

    /// Runs the three stages over pre-tokenized words.
    pub fn annotate_words<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<WordRecord>> {
        let none: [Vec<&str>; 0] = [];
        let pos = self.pos.predict(words, &none)?;
        let chunk = self.chunk.predict(words, std::slice::from_ref(&pos))?;
        let ner = self.ner.predict(words, &[pos.clone(), chunk.clone()])?;
        Ok(words
            .iter()
            .zip(pos)
            .zip(chunk)
            .zip(ner)
            .map(|(((w, p), c), n)| WordRecord {
                word: w.as_ref().to_string(),
                pos: Some(p),
                chunk: Some(c),
                ner: Some(n),
            })
            .collect())
    }

    /// Tokenizes and annotates `text`. Blank text gives an empty document.
    pub fn annotate(&self, text: &str) -> Result<AnnotatedDocument> {
        let sentences = self.tokenizer.tokenize(text)?;
        let sentences = sentences
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| self.annotate_words(s))
            .collect::<Result<_>>()?;
        Ok(AnnotatedDocument { sentences })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInfo {
    pub label: String,
    pub description: String,
}

/// Base labels with descriptions for each task, as served to clients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCatalog {
    pub pos: Vec<LabelInfo>,
    pub chunk: Vec<LabelInfo>,
    pub ner: Vec<LabelInfo>,
}

pub fn label_catalog() -> LabelCatalog {
    let list = |task: Task| {
        LabelScheme::base_table(task)
            .iter()
            .map(|&(label, description)| LabelInfo {
                label: label.to_string(),
                description: description.to_string(),
            })
            .collect()
    };
    LabelCatalog {
        pos: list(Task::Pos),
        chunk: list(Task::Chunk),
        ner: list(Task::Ner),
    }
}
