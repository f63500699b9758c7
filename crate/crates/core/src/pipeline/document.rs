use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One word and its three labels. Labels are `None` until the matching
/// pipeline stage has run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordRecord {
    pub word: String,
    pub pos: Option<String>,
    pub chunk: Option<String>,
    pub ner: Option<String>,
}

impl WordRecord {
    pub fn new(word: impl Into<String>) -> Self {
        WordRecord {
            word: word.into(),
            ..Default::default()
        }
    }

    pub fn is_complete(&self) -> bool {
        self.pos.is_some() && self.chunk.is_some() && self.ner.is_some()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub sentences: Vec<Vec<WordRecord>>,
}

impl AnnotatedDocument {
    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    fn check_complete(&self) -> Result<()> {
        for (i, s) in self.sentences.iter().enumerate() {
            if let Some(j) = s.iter().position(|w| !w.is_complete()) {
                return Err(Error::Unannotated { sentence: i, word: j });
            }
        }
        Ok(())
    }

    /// `{"sentences":[[{"word":…,"pos":…,"chunk":…,"ner":…},…],…]}` as
    /// UTF-8 without escaping non-ASCII characters.
    pub fn to_json(&self) -> Result<String> {
        self.check_complete()?;
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AnnotatedDocument = serde_json::from_str(text)?;
        doc.check_complete()?;
        Ok(doc)
    }
}
