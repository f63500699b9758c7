use crate::error::Result;

/// Raw text to sentences of words. Multi-syllable words are expected to
/// arrive joined by underscores.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Result<Vec<Vec<String>>>;
}

/// Whitespace word splitting with sentence breaks after `.`, `!` and `?`.
///
/// A trailing run of terminal punctuation is split off its word when the
/// word ends at whitespace or end of input, so `"đi."` gives `["đi", "."]`
/// while `"3.5"` stays whole. Any token made only of terminal punctuation
/// closes the sentence.
#[derive(Clone, Copy, Debug, Default)]
pub struct DefaultTokenizer;

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

impl Tokenizer for DefaultTokenizer {
    fn tokenize(&self, text: &str) -> Result<Vec<Vec<String>>> {
        let mut sentences = Vec::new();
        let mut current: Vec<String> = Vec::new();
        for chunk in text.split_whitespace() {
            let stem = chunk.trim_end_matches(is_terminal);
            let parts: &[&str] = if stem.is_empty() || stem.len() == chunk.len() {
                &[chunk]
            } else {
                &[stem, &chunk[stem.len()..]]
            };
            for part in parts {
                current.push(part.to_string());
                if part.chars().all(is_terminal) {
                    sentences.push(std::mem::take(&mut current));
                }
            }
        }
        if !current.is_empty() {
            sentences.push(current);
        }
        Ok(sentences)
    }
}
