//! Browser bindings for three small interactive views over `seqlab-core`.
//!
//! Every export takes and returns JSON text. The plain functions are the
//! implementation and can be called from Rust; the `wasm_bindgen` wrappers
//! only turn error strings into JS exceptions.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use seqlab_core::crf::{log_partition, marginals, viterbi_decode, CrfParams};
use seqlab_core::data::{LabelScheme, Task};
use seqlab_core::eval::{evaluate, extract_spans, to_iob2, EvalReport, Span};
use seqlab_core::pipeline::{DefaultTokenizer, Tokenizer};
use seqlab_core::Tensor;

#[derive(Deserialize)]
struct Lattice {
    emissions: Vec<Vec<f64>>,
    transitions: Vec<Vec<f64>>,
    #[serde(default)]
    start: Option<Vec<f64>>,
    #[serde(default)]
    end: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct Decoded {
    path: Vec<usize>,
    score: f64,
    log_partition: f64,
    /// Probability of the best path under the CRF.
    probability: f64,
    marginals: Vec<Vec<f64>>,
}

fn matrix(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<Tensor, String> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(format!("every {what} row needs {cols} values"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(format!("{what} must be finite numbers"));
    }
    Tensor::matrix(rows.len(), cols, rows.concat()).map_err(|e| e.to_string())
}

fn vector(values: Option<Vec<f64>>, len: usize, what: &str) -> Result<Tensor, String> {
    let v = values.unwrap_or_else(|| vec![0.0; len]);
    if v.len() != len || v.iter().any(|x| !x.is_finite()) {
        return Err(format!("{what} needs {len} finite values"));
    }
    Ok(Tensor::vector(v))
}

/// Best path, partition function and per-position marginals of a lattice
/// given as `{"emissions": T×L, "transitions": L×L, "start"?: L, "end"?: L}`.
pub fn decode_lattice(json: &str) -> Result<String, String> {
    let lattice: Lattice = serde_json::from_str(json).map_err(|e| format!("bad lattice: {e}"))?;
    let labels = lattice.transitions.len();
    if lattice.emissions.is_empty() || labels == 0 {
        return Err("the lattice needs at least one position and one label".into());
    }
    let emissions = matrix(&lattice.emissions, labels, "emission")?;
    let params = CrfParams {
        transitions: matrix(&lattice.transitions, labels, "transition")?,
        start: vector(lattice.start, labels, "start")?,
        end: vector(lattice.end, labels, "end")?,
    };
    let (path, score) = viterbi_decode(&emissions, &params).map_err(|e| e.to_string())?;
    let log_z = log_partition(&emissions, &params).map_err(|e| e.to_string())?;
    let m = marginals(&emissions, &params).map_err(|e| e.to_string())?;
    let decoded = Decoded {
        path,
        score,
        log_partition: log_z,
        probability: (score - log_z).exp(),
        marginals: (0..m.rows()).map(|r| m.row(r).to_vec()).collect(),
    };
    serde_json::to_string(&decoded).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SentenceSpans {
    gold: Vec<Span>,
    predicted: Vec<Span>,
    /// The prediction rewritten as well-formed IOB2.
    repaired: Vec<String>,
}

#[derive(Serialize)]
struct Scored {
    report: String,
    evaluation: EvalReport,
    sentences: Vec<SentenceSpans>,
}

fn label_lines(text: &str) -> Vec<Vec<&str>> {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|l| !l.is_empty())
        .collect()
}

/// conlleval-style scores for label sequences, one sentence per line.
pub fn score_labels(task: &str, gold: &str, predicted: &str) -> Result<String, String> {
    let task: Task = task.parse()?;
    let scheme = LabelScheme::for_task(task);
    let (g, p) = (label_lines(gold), label_lines(predicted));
    if g.len() != p.len() {
        return Err(format!("{} gold lines but {} predicted lines", g.len(), p.len()));
    }
    for (i, (a, b)) in g.iter().zip(&p).enumerate() {
        if a.len() != b.len() {
            return Err(format!(
                "line {}: {} gold labels but {} predicted",
                i + 1,
                a.len(),
                b.len()
            ));
        }
    }
    let evaluation = evaluate(&g, &p, &scheme).map_err(|e| e.to_string())?;
    let sentences = if task.is_span() {
        g.iter()
            .zip(&p)
            .map(|(a, b)| {
                Ok(SentenceSpans {
                    gold: extract_spans(a, &scheme)?,
                    predicted: extract_spans(b, &scheme)?,
                    repaired: to_iob2(b, &scheme)?,
                })
            })
            .collect::<seqlab_core::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?
    } else {
        Vec::new()
    };
    let scored = Scored {
        report: evaluation.conlleval_text(),
        evaluation,
        sentences,
    };
    serde_json::to_string(&scored).map_err(|e| e.to_string())
}

/// Sentences of words as the annotation service would see them.
pub fn tokenize_text(text: &str) -> Result<String, String> {
    let sentences = DefaultTokenizer.tokenize(text).map_err(|e| e.to_string())?;
    serde_json::to_string(&sentences).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = decodeLattice)]
pub fn decode_lattice_js(json: &str) -> Result<String, JsError> {
    decode_lattice(json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = scoreLabels)]
pub fn score_labels_js(task: &str, gold: &str, predicted: &str) -> Result<String, JsError> {
    score_labels(task, gold, predicted).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = tokenize)]
pub fn tokenize_js(text: &str) -> Result<String, JsError> {
    tokenize_text(text).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn lattice_prefers_strong_emissions() {
        let out = parse(
            &decode_lattice(r#"{"emissions": [[2, 0], [0, 1], [3, 0]], "transitions": [[0, 0], [0, 0]]}"#).unwrap(),
        );
        assert_eq!(out["path"], serde_json::json!([0, 1, 0]));
        assert_eq!(out["score"], 6.0);
        let p = out["probability"].as_f64().unwrap();
        assert!(p > 0.0 && p < 1.0);
        for row in out["marginals"].as_array().unwrap() {
            let sum: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_shape_errors() {
        assert!(decode_lattice(r#"{"emissions": [[1, 2, 3]], "transitions": [[0, 0], [0, 0]]}"#).is_err());
        assert!(decode_lattice(r#"{"emissions": [], "transitions": [[0]]}"#).is_err());
        assert!(decode_lattice(r#"{"emissions": [[1]], "transitions": [[0]], "start": [1, 2]}"#).is_err());
        assert!(decode_lattice("not json").is_err());
    }

    #[test]
    fn scores_with_repair() {
        let out = parse(&score_labels("ner", "B-PER I-PER O\nB-LOC", "I-PER I-PER O\nO").unwrap());
        let overall = &out["evaluation"]["overall"];
        assert_eq!(overall["correct"], 1);
        assert_eq!(overall["gold"], 2);
        assert_eq!(
            out["sentences"][0]["repaired"],
            serde_json::json!(["B-PER", "I-PER", "O"])
        );
        assert!(out["report"]
            .as_str()
            .unwrap()
            .starts_with("processed 4 tokens with 2 phrases"));
    }

    #[test]
    fn pos_scores_are_accuracy() {
        let out = parse(&score_labels("pos", "N V", "N N").unwrap());
        assert_eq!(out["evaluation"]["accuracy"], 50.0);
        assert!(out["evaluation"]["overall"].is_null());
    }

    #[test]
    fn score_input_errors() {
        assert!(score_labels("ner", "B-PER", "B-PER O").is_err());
        assert!(score_labels("ner", "B-PER\nO", "B-PER").is_err());
        assert!(score_labels("ner", "B-XYZ", "O").is_err());
        assert!(score_labels("srl", "O", "O").is_err());
    }

    #[test]
    fn tokenizes_into_sentences() {
        let out = parse(&tokenize_text("Học_sinh giỏi . Bà Lan đến!").unwrap());
        assert_eq!(
            out,
            serde_json::json!([["Học_sinh", "giỏi", "."], ["Bà", "Lan", "đến", "!"]])
        );
    }
}
