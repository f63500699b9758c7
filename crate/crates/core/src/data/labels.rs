//! Closed label alphabets for the three tasks.
//!
//! Index layout is stable and is what models store:
//! * POS: the 21 tags in the order `N, V, CH, R, E, A, P, Np, M, C, Nc, L, T,
//!   Ny, Nu, X, B, S, I, Y, Vy`.
//! * chunk / NER: `O` at index 0, then `B-x`, `I-x` for each base label `x`
//!   in order, so `B-x` is `1 + 2k` and `I-x` is `2 + 2k`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Pos,
    Chunk,
    Ner,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Pos, Task::Chunk, Task::Ner];

    pub fn name(self) -> &'static str {
        match self {
            Task::Pos => "pos",
            Task::Chunk => "chunk",
            Task::Ner => "ner",
        }
    }

    /// Number of CoNLL columns in a corpus for this task.
    pub fn columns(self) -> usize {
        match self {
            Task::Pos => 2,
            Task::Chunk => 3,
            Task::Ner => 4,
        }
    }

    pub fn is_span(self) -> bool {
        !matches!(self, Task::Pos)
    }

    /// Upstream tasks whose predicted tags feed this task's encoder.
    pub fn upstream(self) -> &'static [Task] {
        match self {
            Task::Pos => &[],
            Task::Chunk => &[Task::Pos],
            Task::Ner => &[Task::Pos, Task::Chunk],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pos" => Ok(Task::Pos),
            "chunk" => Ok(Task::Chunk),
            "ner" => Ok(Task::Ner),
            other => Err(format!("unknown task `{other}` (expected pos, chunk or ner)")),
        }
    }
}

pub const POS_TAGS: [(&str, &str); 21] = [
    ("N", "Common noun"),
    ("V", "Verb"),
    ("CH", "Punctuation"),
    ("R", "Adverb"),
    ("E", "Preposition"),
    ("A", "Adjective"),
    ("P", "Pronoun"),
    ("Np", "Proper noun"),
    ("M", "Numeral"),
    ("C", "Conjunction"),
    ("Nc", "Classifier noun"),
    ("L", "Determiner"),
    ("T", "Particle / auxiliary"),
    ("Ny", "Abbreviated noun"),
    ("Nu", "Unit noun"),
    ("X", "Unknown / unclassified"),
    ("B", "Foreign (borrowed) word"),
    ("S", "Symbol"),
    ("I", "Interjection"),
    ("Y", "Abbreviation"),
    ("Vy", "Abbreviated verb"),
];

pub const CHUNK_TAGS: [(&str, &str); 6] = [
    ("NP", "Noun phrase"),
    ("VP", "Verb phrase"),
    ("PP", "Prepositional phrase"),
    ("AP", "Adjective phrase"),
    ("QP", "Quantity phrase"),
    ("RP", "Adverb phrase"),
];

pub const NER_TAGS: [(&str, &str); 4] = [
    ("PER", "Person"),
    ("LOC", "Location"),
    ("ORG", "Organization"),
    ("MISC", "Miscellaneous entity"),
];

/// A task's label alphabet and its encoded (IOB2 for span tasks) labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelScheme {
    task: Task,
    base: Vec<&'static str>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelScheme {
    pub fn for_task(task: Task) -> Self {
        let base: Vec<&'static str> = Self::base_table(task).iter().map(|(l, _)| *l).collect();
        let labels: Vec<String> = if task.is_span() {
            std::iter::once("O".to_string())
                .chain(base.iter().flat_map(|b| [format!("B-{b}"), format!("I-{b}")]))
                .collect()
        } else {
            base.iter().map(|b| b.to_string()).collect()
        };
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        LabelScheme {
            task,
            base,
            labels,
            index,
        }
    }

    /// `(label, description)` pairs for a task's base labels.
    pub fn base_table(task: Task) -> &'static [(&'static str, &'static str)] {
        match task {
            Task::Pos => &POS_TAGS,
            Task::Chunk => &CHUNK_TAGS,
            Task::Ner => &NER_TAGS,
        }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn base_labels(&self) -> &[&'static str] {
        &self.base
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn is_span(&self) -> bool {
        self.task.is_span()
    }
}

/// Decoded form of an encoded span label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpanTag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> SpanTag<'a> {
    pub fn parse(label: &'a str) -> Option<Self> {
        match label {
            "O" => Some(SpanTag::Outside),
            _ => match label.split_once('-') {
                Some(("B", t)) if !t.is_empty() => Some(SpanTag::Begin(t)),
                Some(("I", t)) if !t.is_empty() => Some(SpanTag::Inside(t)),
                _ => None,
            },
        }
    }
}
