use std::io::BufRead;

use log::warn;

use crate::data::vocab::{Vocabulary, PAD, UNK};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Word vectors indexed by a [`Vocabulary`]; row `PAD` is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    matrix: Tensor,
}

/// Bound of the uniform initializer for a `dim`-wide embedding row.
pub fn init_bound(dim: usize) -> f64 {
    (3.0 / dim as f64).sqrt()
}

impl EmbeddingTable {
    /// A table holding only `PAD` and a random `UNK` row.
    pub fn empty(dim: usize, rng: &mut Rng) -> Self {
        let mut matrix = Tensor::zeros(&[2, dim]);
        let b = init_bound(dim);
        matrix.row_mut(UNK).iter_mut().for_each(|v| *v = rng.uniform(b));
        EmbeddingTable {
            vocab: Vocabulary::new(),
            matrix,
        }
    }

    pub fn from_parts(vocab: Vocabulary, matrix: Tensor) -> Result<Self> {
        if matrix.rank() != 2 || matrix.shape()[0] != vocab.len() {
            return Err(Error::Shape {
                op: "embedding table",
                left: vec![vocab.len()],
                right: matrix.shape().to_vec(),
            });
        }
        Ok(EmbeddingTable { vocab, matrix })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Row for `word`: exact match, then lowercase, then `UNK`.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.matrix.row(self.vocab.get_word(word))
    }

    /// Returns a table over `vocab` (a superset of this table's vocabulary):
    /// known rows are copied, new rows drawn uniformly from `±√(3/d)`.
    pub fn extend_to(&self, vocab: &Vocabulary, rng: &mut Rng) -> EmbeddingTable {
        let d = self.dim();
        let b = init_bound(d);
        let mut matrix = Tensor::zeros(&[vocab.len(), d]);
        for (id, item) in vocab.items().iter().enumerate() {
            let row = matrix.row_mut(id);
            if id == PAD {
                continue;
            }
            match self.vocab.lookup(item) {
                Some(src) => row.copy_from_slice(self.matrix.row(src)),
                None => row.iter_mut().for_each(|v| *v = rng.uniform(b)),
            }
        }
        EmbeddingTable {
            vocab: vocab.clone(),
            matrix,
        }
    }
}

/// Loads the word2vec text format: a `count dim` header, then one
/// `word v1 … vd` line per word. Duplicate words keep their first vector.
pub fn load_embeddings<R: BufRead>(source: R, rng: &mut Rng) -> Result<EmbeddingTable> {
    let mut lines = source.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing `count dim` header".into(),
    })??;
    let mut parts = header.split_whitespace().map(str::parse::<usize>);
    let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(Ok(c)), Some(Ok(d)), None) if d > 0 => (c, d),
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("malformed header `{header}`"),
            })
        }
    };

    let mut table = EmbeddingTable::empty(dim, rng);
    let mut data = table.matrix.into_data();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite value `{f}`"),
                }),
                Err(e) => Err(Error::Parse {
                    line: lineno,
                    message: format!("bad value `{f}`: {e}"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(Error::EmbeddingDim {
                line: lineno,
                expected: dim,
                found: values.len(),
            });
        }
        if table.vocab.contains(word) {
            warn!("duplicate embedding for `{word}` at line {lineno}; keeping the first");
            continue;
        }
        table.vocab.insert(word);
        data.extend_from_slice(&values);
    }
    if table.vocab.len() - 2 != count {
        warn!(
            "embedding header declares {count} words, file has {}",
            table.vocab.len() - 2
        );
    }
    table.matrix = Tensor::matrix(table.vocab.len(), dim, data)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_small_file() {
        let t = load_embeddings("2 3\na 1 2 3\nb 4 5 6\n".as_bytes(), &mut Rng::new(0)).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.lookup("a"), &[1.0, 2.0, 3.0]);
        assert_eq!(t.lookup("b"), &[4.0, 5.0, 6.0]);
        assert_eq!(t.matrix().row(PAD), &[0.0; 3]);
        assert_eq!(t.lookup("zzz"), t.matrix().row(UNK));
    }

    #[test]
    fn unk_row_is_bounded() {
        let t = load_embeddings("0 300\n".as_bytes(), &mut Rng::new(5)).unwrap();
        let b = init_bound(300);
        let unk = t.matrix().row(UNK);
        assert!(unk.iter().all(|v| v.abs() <= b));
        let norm = unk.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 3f64.sqrt());
        assert!(norm > 0.0);
    }

    #[test]
    fn dim_mismatch_names_line() {
        let err = load_embeddings("2 3\na 1 2 3\nb 4 5\n".as_bytes(), &mut Rng::new(0)).unwrap_err();
        assert!(matches!(
            err,
            Error::EmbeddingDim {
                line: 3,
                expected: 3,
                found: 2
            }
        ));
    }

    #[test]
    fn duplicate_keeps_first() {
        let t = load_embeddings("2 1\na 1\na 2\n".as_bytes(), &mut Rng::new(0)).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.lookup("a"), &[1.0]);
    }

    #[test]
    fn bad_header() {
        assert!(load_embeddings("hello\n".as_bytes(), &mut Rng::new(0)).is_err());
        assert!(load_embeddings("".as_bytes(), &mut Rng::new(0)).is_err());
    }

    #[test]
    fn extend_copies_known_rows() {
        let t = load_embeddings("1 2\na 1 2\n".as_bytes(), &mut Rng::new(0)).unwrap();
        let mut v = t.vocab().clone();
        v.insert("new");
        let e = t.extend_to(&v, &mut Rng::new(1));
        assert_eq!(e.lookup("a"), &[1.0, 2.0]);
        assert_eq!(e.matrix().row(UNK), t.matrix().row(UNK));
        assert_ne!(e.lookup("new"), e.matrix().row(UNK));
    }
}
