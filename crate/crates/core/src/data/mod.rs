//! Corpora, label schemes, vocabularies and pre-trained embeddings.

pub mod conll;
pub mod embeddings;
pub mod labels;
pub mod split;
pub mod vocab;

pub use conll::{read_conll, read_conll_str, to_conll_string, write_conll, Sentence, Token};
pub use embeddings::{load_embeddings, EmbeddingTable};
pub use labels::{LabelScheme, SpanTag, Task};
pub use split::{split_corpus, split_sizes};
pub use vocab::{build_vocabularies, Vocabularies, Vocabulary, PAD, UNK};
