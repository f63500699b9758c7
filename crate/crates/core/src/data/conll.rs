//! CoNLL column format: one token per line, columns `word [pos [chunk
//! [ner]]]` separated by runs of spaces or tabs, blank line between
//! sentences.

use std::io::{BufRead, Write};

use crate::data::labels::{LabelScheme, Task};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Token {
    pub word: String,
    pub pos: Option<String>,
    pub chunk: Option<String>,
    pub ner: Option<String>,
}

impl Token {
    pub fn new(word: impl Into<String>) -> Self {
        Token {
            word: word.into(),
            ..Default::default()
        }
    }

    pub fn tag(&self, task: Task) -> Option<&str> {
        match task {
            Task::Pos => self.pos.as_deref(),
            Task::Chunk => self.chunk.as_deref(),
            Task::Ner => self.ner.as_deref(),
        }
    }

    pub fn set_tag(&mut self, task: Task, label: impl Into<String>) {
        let slot = match task {
            Task::Pos => &mut self.pos,
            Task::Chunk => &mut self.chunk,
            Task::Ner => &mut self.ner,
        };
        *slot = Some(label.into());
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        Sentence {
            tokens: words.iter().map(|w| Token::new(w.as_ref())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.word.as_str()).collect()
    }

    /// The labels of one column, if every token carries it.
    pub fn tags(&self, task: Task) -> Option<Vec<&str>> {
        self.tokens.iter().map(|t| t.tag(task)).collect()
    }
}

/// Reads a corpus with exactly `columns` fields per token line (2 = POS,
/// 3 = +chunk, 4 = +NER). Labels are validated against their schemes.
pub fn read_conll<R: BufRead>(source: R, columns: usize) -> Result<Vec<Sentence>> {
    if !(1..=4).contains(&columns) {
        return Err(Error::Config(format!("unsupported column count {columns}")));
    }
    let schemes: Vec<LabelScheme> = Task::ALL.iter().map(|&t| LabelScheme::for_task(t)).collect();
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let fields: Vec<&str> = line.split([' ', '\t']).filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence::new(std::mem::take(&mut current)));
            }
            continue;
        }
        if fields.len() != columns {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {columns} columns, found {}", fields.len()),
            });
        }
        let mut token = Token::new(fields[0]);
        for (k, field) in fields[1..].iter().enumerate() {
            let task = Task::ALL[k];
            if !schemes[k].contains(field) {
                return Err(Error::UnknownLabel {
                    task,
                    label: field.to_string(),
                });
            }
            token.set_tag(task, *field);
        }
        current.push(token);
    }
    if !current.is_empty() {
        sentences.push(Sentence::new(current));
    }
    Ok(sentences)
}

pub fn read_conll_str(text: &str, columns: usize) -> Result<Vec<Sentence>> {
    read_conll(text.as_bytes(), columns)
}

/// Writes `columns` fields per token with single-space separators and a
/// blank line after every sentence.
pub fn write_conll<W: Write>(mut sink: W, sentences: &[Sentence], columns: usize) -> Result<()> {
    for (si, sentence) in sentences.iter().enumerate() {
        for token in &sentence.tokens {
            sink.write_all(token.word.as_bytes())?;
            for &task in &Task::ALL[..columns - 1] {
                let tag = token.tag(task).ok_or(Error::MissingColumn {
                    sentence: si,
                    column: task.name(),
                })?;
                write!(sink, " {tag}")?;
            }
            sink.write_all(b"\n")?;
        }
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_conll_string(sentences: &[Sentence], columns: usize) -> Result<String> {
    let mut buf = Vec::new();
    write_conll(&mut buf, sentences, columns)?;
    Ok(String::from_utf8(buf).expect("conll output is UTF-8"))
}
