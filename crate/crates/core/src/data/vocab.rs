use std::collections::HashMap;

use crate::data::conll::Sentence;
use crate::data::embeddings::EmbeddingTable;
use crate::data::labels::{LabelScheme, Task};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// String ↔ id map with reserved `PAD` (0) and `UNK` (1) entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Vocabulary {
            items: Vec::new(),
            index: HashMap::new(),
        };
        v.insert(PAD_TOKEN);
        v.insert(UNK_TOKEN);
        v
    }

    /// Rebuilds a vocabulary from its full item list (reserved entries
    /// included).
    pub fn from_items(items: Vec<String>) -> Option<Self> {
        if items.len() < 2 || items[PAD] != PAD_TOKEN || items[UNK] != UNK_TOKEN {
            return None;
        }
        let index: HashMap<String, usize> = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        if index.len() != items.len() {
            return None;
        }
        Some(Vocabulary { items, index })
    }

    /// Inserts `item` if absent and returns its id.
    pub fn insert(&mut self, item: &str) -> usize {
        if let Some(&i) = self.index.get(item) {
            return i;
        }
        self.items.push(item.to_string());
        self.index.insert(item.to_string(), self.items.len() - 1);
        self.items.len() - 1
    }

    pub fn lookup(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    /// Id of `item`, or `UNK`.
    pub fn get(&self, item: &str) -> usize {
        self.lookup(item).unwrap_or(UNK)
    }

    /// Exact match, then lowercase match, then `UNK`.
    pub fn get_word(&self, word: &str) -> usize {
        self.lookup(word)
            .or_else(|| self.lookup(&word.to_lowercase()))
            .unwrap_or(UNK)
    }

    pub fn item(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.len() <= 2
    }

    pub fn contains(&self, item: &str) -> bool {
        self.index.contains_key(item)
    }
}

/// Vocabularies derived from a training set.
#[derive(Clone, Debug)]
pub struct Vocabularies {
    pub words: Vocabulary,
    pub chars: Vocabulary,
    pub labels: LabelScheme,
}

/// Word vocabulary = embedding vocabulary ∪ training words; char
/// vocabulary = every character of every training word.
pub fn build_vocabularies(train: &[Sentence], embeddings: Option<&EmbeddingTable>, task: Task) -> Vocabularies {
    let mut words = embeddings.map(|e| e.vocab().clone()).unwrap_or_default();
    let mut chars = Vocabulary::new();
    let mut buf = [0u8; 4];
    for sentence in train {
        for token in &sentence.tokens {
            words.insert(&token.word);
            for c in token.word.chars() {
                chars.insert(c.encode_utf8(&mut buf));
            }
        }
    }
    Vocabularies {
        words,
        chars,
        labels: LabelScheme::for_task(task),
    }
}
