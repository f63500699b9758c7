//! Single-file model container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  "SEQLABM\0"
//! 8       4     format version, u32 LE
//! 12      4     header length H, u32 LE
//! 16      8     payload length P, u64 LE
//! 24      H     header, UTF-8 JSON (task, labels, config, vocabularies,
//!               parameter names and shapes in payload order)
//! 24+H    P     weights, f32 LE, parameters concatenated row-major
//! 24+H+P  32    SHA-256 of bytes [0, 24+H+P)
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::ParamSet;
use crate::data::{Task, Vocabulary};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::model::{ModelConfig, SequenceLabelModel};

pub const MAGIC: &[u8; 8] = b"SEQLABM\0";
pub const FORMAT_VERSION: u32 = 1;
const PRELUDE: usize = 24;
const CHECKSUM: usize = 32;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    task: Task,
    labels: Vec<String>,
    fingerprint: String,
    rng: String,
    config: ModelConfig,
    words: Vec<String>,
    chars: Vec<String>,
    params: Vec<ParamEntry>,
}

pub fn save_model<W: Write>(model: &SequenceLabelModel, mut sink: W) -> Result<()> {
    let params = model.params();
    let header = Header {
        format_version: FORMAT_VERSION,
        task: model.task(),
        labels: model.scheme().labels().to_vec(),
        fingerprint: model.fingerprint(),
        rng: crate::rng::ALGORITHM.to_string(),
        config: model.config().clone(),
        words: model.word_vocab().items().to_vec(),
        chars: model.char_vocab().items().to_vec(),
        params: params
            .iter()
            .map(|(_, p)| ParamEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                trainable: p.trainable,
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut payload = Vec::new();
    for (_, p) in params.iter() {
        for &v in p.value.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut buf = Vec::with_capacity(PRELUDE + header.len() + payload.len() + CHECKSUM);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&payload);
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    sink.write_all(&buf)?;
    Ok(())
}

pub fn model_to_bytes(model: &SequenceLabelModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    save_model(model, &mut buf)?;
    Ok(buf)
}

pub fn load_model<R: Read>(mut source: R) -> Result<SequenceLabelModel> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    model_from_bytes(&bytes)
}

/// Loads a model and checks that it was trained for `task`.
pub fn load_model_for<R: Read>(source: R, task: Task) -> Result<SequenceLabelModel> {
    let model = load_model(source)?;
    if model.task() != task {
        return Err(Error::TaskMismatch {
            expected: task,
            found: model.task(),
        });
    }
    Ok(model)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<SequenceLabelModel> {
    if bytes.len() < 8 {
        return Err(Error::Truncated);
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < PRELUDE + CHECKSUM {
        return Err(Error::Truncated);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = u32_at(12) as usize;
    let payload_len = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let body = PRELUDE
        .checked_add(header_len)
        .and_then(|n| n.checked_add(payload_len))
        .ok_or(Error::Truncated)?;
    if bytes.len() < body + CHECKSUM {
        return Err(Error::Truncated);
    }
    if bytes.len() > body + CHECKSUM {
        return Err(Error::Container("trailing bytes after checksum".into()));
    }
    if Sha256::digest(&bytes[..body]).as_slice() != &bytes[body..] {
        return Err(Error::Checksum);
    }

    let header: Header = serde_json::from_slice(&bytes[PRELUDE..PRELUDE + header_len])?;
    let mut params = ParamSet::new();
    let mut payload = bytes[PRELUDE + header_len..body].chunks_exact(4);
    for entry in header.params {
        let n: usize = entry.shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let chunk = payload.next().ok_or(Error::Truncated)?;
            data.push(f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64);
        }
        let id = params.add(entry.name, Tensor::new(entry.shape, data)?);
        params.set_trainable(id, entry.trainable);
    }
    if payload.next().is_some() {
        return Err(Error::Container("payload longer than declared parameters".into()));
    }
    let words = Vocabulary::from_items(header.words).ok_or_else(|| Error::Container("bad word vocabulary".into()))?;
    let chars = Vocabulary::from_items(header.chars).ok_or_else(|| Error::Container("bad char vocabulary".into()))?;
    let model = SequenceLabelModel::from_parts(header.task, words, chars, header.config, params)?;
    if model.scheme().labels() != header.labels.as_slice() {
        return Err(Error::Container("label set differs from this build's scheme".into()));
    }
    Ok(model)
}
