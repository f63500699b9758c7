//! Token accuracy and exact-match span precision / recall / F1 with
//! conlleval chunk segmentation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{LabelScheme, SpanTag};
use crate::error::{Error, Result};

/// A labeled token range, both ends inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Span {
            start,
            end,
            label: label.into(),
        }
    }
}

/// Percentage of positions where `pred` agrees with `gold`.
pub fn accuracy<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::Length {
            left: gold.len(),
            right: pred.len(),
        });
    }
    let (mut correct, mut total) = (0usize, 0usize);
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(Error::Length {
                left: g.len(),
                right: p.len(),
            });
        }
        correct += g.iter().zip(p).filter(|(a, b)| a.as_ref() == b.as_ref()).count();
        total += g.len();
    }
    Ok(if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    })
}

/// Segments an IOB label sequence into spans.
///
/// `B-x` always opens a span. `I-x` continues an open span of type `x` and
/// otherwise opens a new one, so malformed IOB1-style input such as
/// `[I-PER, I-PER]` still yields one span. A span closes before `O`, before
/// any `B-`, and at a type change.
pub fn extract_spans<S: AsRef<str>>(labels: &[S], scheme: &LabelScheme) -> Result<Vec<Span>> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, label) in labels.iter().enumerate() {
        let label = label.as_ref();
        let tag = SpanTag::parse(label)
            .filter(|_| scheme.contains(label))
            .ok_or_else(|| Error::UnknownLabel {
                task: scheme.task(),
                label: label.to_string(),
            })?;
        let continues = matches!((tag, open), (SpanTag::Inside(t), Some((_, cur))) if t == cur);
        if continues {
            continue;
        }
        if let Some((start, ty)) = open.take() {
            spans.push(Span::new(start, i - 1, ty));
        }
        open = match tag {
            SpanTag::Outside => None,
            SpanTag::Begin(t) | SpanTag::Inside(t) => Some((i, t)),
        };
    }
    if let Some((start, ty)) = open {
        spans.push(Span::new(start, labels.len() - 1, ty));
    }
    Ok(spans)
}

/// IOB2 encoding of non-overlapping spans over `len` tokens.
pub fn spans_to_iob2(spans: &[Span], len: usize) -> Vec<String> {
    let mut out = vec!["O".to_string(); len];
    for s in spans {
        out[s.start] = format!("B-{}", s.label);
        for slot in &mut out[s.start + 1..=s.end] {
            *slot = format!("I-{}", s.label);
        }
    }
    out
}

/// Rewrites any IOB sequence into IOB2 under conlleval segmentation.
pub fn to_iob2<S: AsRef<str>>(labels: &[S], scheme: &LabelScheme) -> Result<Vec<String>> {
    Ok(spans_to_iob2(&extract_spans(labels, scheme)?, labels.len()))
}

/// `2PR / (P + R)`, zero when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Rounds half-up to two decimals.
pub fn round2(x: f64) -> f64 {
    // Nudge by a relative epsilon so that values printed as ...5 round up.
    (x * 100.0 * (1.0 + 1e-12)).round() / 100.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpanScores {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SpanScores {
    fn from_counts(gold: usize, predicted: usize, correct: usize) -> Self {
        let precision = if predicted == 0 {
            0.0
        } else {
            100.0 * correct as f64 / predicted as f64
        };
        let recall = if gold == 0 {
            0.0
        } else {
            100.0 * correct as f64 / gold as f64
        };
        SpanScores {
            gold,
            predicted,
            correct,
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tokens: usize,
    /// Token accuracy in percent.
    pub accuracy: f64,
    /// Span scores; absent for POS.
    pub overall: Option<SpanScores>,
    pub per_label: BTreeMap<String, SpanScores>,
}

/// Exact-match span scores over aligned sentences.
pub fn prf1(gold: &[Vec<Span>], pred: &[Vec<Span>]) -> Result<(SpanScores, BTreeMap<String, SpanScores>)> {
    if gold.len() != pred.len() {
        return Err(Error::Length {
            left: gold.len(),
            right: pred.len(),
        });
    }
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        for s in g {
            counts.entry(s.label.clone()).or_default().0 += 1;
        }
        for s in p {
            let c = counts.entry(s.label.clone()).or_default();
            c.1 += 1;
            if g.contains(s) {
                c.2 += 1;
            }
        }
    }
    let per_label: BTreeMap<String, SpanScores> = counts
        .iter()
        .map(|(l, &(g, p, c))| (l.clone(), SpanScores::from_counts(g, p, c)))
        .collect();
    let (g, p, c) = counts
        .values()
        .fold((0, 0, 0), |acc, &(g, p, c)| (acc.0 + g, acc.1 + p, acc.2 + c));
    Ok((SpanScores::from_counts(g, p, c), per_label))
}

/// Full report for one task: accuracy always, spans for span schemes.
pub fn evaluate<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>], scheme: &LabelScheme) -> Result<EvalReport> {
    let accuracy = accuracy(gold, pred)?;
    let tokens = gold.iter().map(Vec::len).sum();
    if !scheme.is_span() {
        return Ok(EvalReport {
            tokens,
            accuracy,
            ..Default::default()
        });
    }
    let g = gold
        .iter()
        .map(|s| extract_spans(s, scheme))
        .collect::<Result<Vec<_>>>()?;
    let p = pred
        .iter()
        .map(|s| extract_spans(s, scheme))
        .collect::<Result<Vec<_>>>()?;
    let (overall, per_label) = prf1(&g, &p)?;
    Ok(EvalReport {
        tokens,
        accuracy,
        overall: Some(overall),
        per_label,
    })
}

impl EvalReport {
    /// The primary dev metric: span F1 for span tasks, accuracy otherwise.
    pub fn headline(&self) -> f64 {
        self.overall.as_ref().map_or(self.accuracy, |o| o.f1)
    }

    /// Text in the layout of the conlleval script.
    pub fn conlleval_text(&self) -> String {
        let mut out = String::new();
        match &self.overall {
            None => {
                let _ = writeln!(out, "processed {} tokens.", self.tokens);
                let _ = writeln!(out, "accuracy: {:6.2}%", round2(self.accuracy));
            }
            Some(o) => {
                let _ = writeln!(
                    out,
                    "processed {} tokens with {} phrases; found: {} phrases; correct: {}.",
                    self.tokens, o.gold, o.predicted, o.correct
                );
                let _ = writeln!(
                    out,
                    "accuracy: {:6.2}%; precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}",
                    round2(self.accuracy),
                    round2(o.precision),
                    round2(o.recall),
                    round2(o.f1)
                );
                for (label, s) in &self.per_label {
                    let _ = writeln!(
                        out,
                        "{:>17}: precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}  {}",
                        label,
                        round2(s.precision),
                        round2(s.recall),
                        round2(s.f1),
                        s.predicted
                    );
                }
            }
        }
        out
    }
}
