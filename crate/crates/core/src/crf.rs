//! Linear-chain CRF over per-token emission scores.
//!
//! A label path `y` scores
//! `start[y₀] + Σₜ emit[t, yₜ] + Σₜ trans[yₜ₋₁, yₜ] + end[y_T₋₁]`.
//! The log partition is computed with the forward recurrence in log space,
//! decoding with Viterbi.

use crate::autodiff::{logsumexp, Tape, Var};
use crate::data::{LabelScheme, SpanTag};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Score pinned onto transitions that IOB2 forbids.
pub const FORBIDDEN: f64 = -1e4;

#[derive(Clone, Debug, PartialEq)]
pub struct CrfParams {
    /// `transitions[i, j]`: score of label `j` following label `i`.
    pub transitions: Tensor,
    pub start: Tensor,
    pub end: Tensor,
}

impl CrfParams {
    pub fn zeros(labels: usize) -> Self {
        CrfParams {
            transitions: Tensor::zeros(&[labels, labels]),
            start: Tensor::zeros(&[labels]),
            end: Tensor::zeros(&[labels]),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.start.len()
    }

    fn trans(&self, from: usize, to: usize) -> f64 {
        self.transitions.data()[from * self.num_labels() + to]
    }

    fn check(&self, emissions: &Tensor) -> Result<(usize, usize)> {
        let l = self.num_labels();
        if emissions.rank() != 2 || emissions.cols() != l {
            return Err(Error::Shape {
                op: "crf",
                left: emissions.shape().to_vec(),
                right: vec![l],
            });
        }
        Ok((emissions.rows(), l))
    }
}

fn check_labels(labels: &[usize], t: usize, l: usize) -> Result<()> {
    if labels.len() != t {
        return Err(Error::Length {
            left: labels.len(),
            right: t,
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= l) {
        return Err(Error::LabelIndex { index: bad, count: l });
    }
    Ok(())
}

/// Unnormalized score of one label path, summed left to right.
pub fn path_score(emissions: &Tensor, labels: &[usize], params: &CrfParams) -> Result<f64> {
    let (t, l) = params.check(emissions)?;
    check_labels(labels, t, l)?;
    let mut score = params.start.data()[labels[0]] + emissions.get2(0, labels[0]);
    for i in 1..t {
        score += params.trans(labels[i - 1], labels[i]);
        score += emissions.get2(i, labels[i]);
    }
    Ok(score + params.end.data()[labels[t - 1]])
}

/// Forward log-scores `α[t, j]` = log-sum of all prefixes ending in `j` at `t`.
fn forward(emissions: &Tensor, params: &CrfParams) -> Result<Vec<Vec<f64>>> {
    let (t, l) = params.check(emissions)?;
    let mut alpha = Vec::with_capacity(t);
    alpha.push(
        (0..l)
            .map(|j| params.start.data()[j] + emissions.get2(0, j))
            .collect::<Vec<_>>(),
    );
    let mut buf = vec![0.0; l];
    for s in 1..t {
        let prev = &alpha[s - 1];
        let next = (0..l)
            .map(|j| {
                for i in 0..l {
                    buf[i] = prev[i] + params.trans(i, j);
                }
                logsumexp(&buf) + emissions.get2(s, j)
            })
            .collect();
        alpha.push(next);
    }
    Ok(alpha)
}

/// `log Σ_y exp(path_score(y))` over all `L^T` paths.
pub fn log_partition(emissions: &Tensor, params: &CrfParams) -> Result<f64> {
    let alpha = forward(emissions, params)?;
    let last = alpha.last().expect("T >= 1");
    let ends: Vec<f64> = last.iter().zip(params.end.data()).map(|(a, e)| a + e).collect();
    Ok(logsumexp(&ends))
}

/// Negative log-likelihood of `gold`; non-negative.
pub fn nll_loss(emissions: &Tensor, gold: &[usize], params: &CrfParams) -> Result<f64> {
    let gold_score = path_score(emissions, gold, params)?;
    Ok(log_partition(emissions, params)? - gold_score)
}

/// Per-position label marginals `P(yₜ = j | x)` from forward-backward.
pub fn marginals(emissions: &Tensor, params: &CrfParams) -> Result<Tensor> {
    let (t, l) = params.check(emissions)?;
    let alpha = forward(emissions, params)?;
    let mut beta = vec![vec![0.0; l]; t];
    beta[t - 1] = params.end.data().to_vec();
    let mut buf = vec![0.0; l];
    for s in (0..t - 1).rev() {
        for i in 0..l {
            for j in 0..l {
                buf[j] = params.trans(i, j) + emissions.get2(s + 1, j) + beta[s + 1][j];
            }
            beta[s][i] = logsumexp(&buf);
        }
    }
    let log_z = log_partition(emissions, params)?;
    let mut out = Tensor::zeros(&[t, l]);
    for s in 0..t {
        for j in 0..l {
            out.row_mut(s)[j] = (alpha[s][j] + beta[s][j] - log_z).exp();
        }
    }
    Ok(out)
}

/// Highest-scoring path and its score. Ties resolve to the lowest label
/// index at every backtrack step.
pub fn viterbi_decode(emissions: &Tensor, params: &CrfParams) -> Result<(Vec<usize>, f64)> {
    let (t, l) = params.check(emissions)?;
    let mut delta: Vec<f64> = (0..l).map(|j| params.start.data()[j] + emissions.get2(0, j)).collect();
    let mut back = vec![vec![0usize; l]; t];
    for s in 1..t {
        let mut next = vec![0.0; l];
        for j in 0..l {
            let mut best = 0;
            let mut best_score = delta[0] + params.trans(0, j);
            for i in 1..l {
                let sc = delta[i] + params.trans(i, j);
                if sc > best_score {
                    best = i;
                    best_score = sc;
                }
            }
            back[s][j] = best;
            next[j] = best_score + emissions.get2(s, j);
        }
        delta = next;
    }
    let mut last = 0;
    let mut last_score = delta[0] + params.end.data()[0];
    for j in 1..l {
        let sc = delta[j] + params.end.data()[j];
        if sc > last_score {
            last = j;
            last_score = sc;
        }
    }
    let mut path = vec![last; t];
    for s in (1..t).rev() {
        path[s - 1] = back[s][path[s]];
    }
    let score = path_score(emissions, &path, params)?;
    Ok((path, score))
}

/// Pins every transition into `I-x` from a label other than `B-x`/`I-x`,
/// and every start into `I-x`, to [`FORBIDDEN`].
pub fn constrain_iob2(params: &CrfParams, scheme: &LabelScheme) -> Result<CrfParams> {
    let mask = iob2_mask(scheme)?;
    let mut out = params.clone();
    apply_mask(&mut out.transitions, &mut out.start, &mask);
    Ok(out)
}

/// Forbidden entries for a span scheme: `(transition flat indices, start
/// indices)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Iob2Mask {
    pub transitions: Vec<usize>,
    pub start: Vec<usize>,
}

pub fn iob2_mask(scheme: &LabelScheme) -> Result<Iob2Mask> {
    if !scheme.is_span() {
        return Err(Error::NotSpanTask(scheme.task()));
    }
    let l = scheme.len();
    let mut mask = Iob2Mask::default();
    for j in 0..l {
        let SpanTag::Inside(ty) = SpanTag::parse(scheme.label(j)).expect("scheme labels parse") else {
            continue;
        };
        mask.start.push(j);
        for i in 0..l {
            let allowed = matches!(
                SpanTag::parse(scheme.label(i)),
                Some(SpanTag::Begin(t)) | Some(SpanTag::Inside(t)) if t == ty
            );
            if !allowed {
                mask.transitions.push(i * l + j);
            }
        }
    }
    Ok(mask)
}

pub fn apply_mask(transitions: &mut Tensor, start: &mut Tensor, mask: &Iob2Mask) {
    for &i in &mask.transitions {
        transitions.data_mut()[i] = FORBIDDEN;
    }
    for &i in &mask.start {
        start.data_mut()[i] = FORBIDDEN;
    }
}

/// Tape handles for the CRF parameters.
#[derive(Clone, Copy, Debug)]
pub struct CrfVars {
    pub transitions: Var,
    pub start: Var,
    pub end: Var,
}

impl CrfVars {
    /// Taped log partition of `emissions` (`[T, L]`).
    pub fn log_partition(&self, tape: &mut Tape, emissions: Var) -> Result<Var> {
        let t = tape.shape(emissions)[0];
        let l = tape.shape(self.start)[0];
        let first = tape.row(emissions, 0)?;
        let mut alpha = tape.add(first, self.start)?;
        for s in 1..t {
            // scores[i, j] = α[i] + trans[i, j] + emit[s, j]
            let col = tape.reshape(alpha, &[l, 1])?;
            let with_prev = tape.add(self.transitions, col)?;
            let emit = tape.row(emissions, s)?;
            let scores = tape.add(with_prev, emit)?;
            alpha = tape.logsumexp_axis(scores, 0)?;
        }
        let fin = tape.add(alpha, self.end)?;
        tape.logsumexp_axis(fin, 0)
    }

    /// Taped score of the path `labels`.
    pub fn path_score(&self, tape: &mut Tape, emissions: Var, labels: &[usize]) -> Result<Var> {
        let (t, l) = (tape.shape(emissions)[0], tape.shape(emissions)[1]);
        check_labels(labels, t, l)?;
        let emit_idx: Vec<usize> = labels.iter().enumerate().map(|(s, &y)| s * l + y).collect();
        let emit = tape.pick(emissions, &emit_idx)?;
        let mut total = tape.sum(emit);
        if t > 1 {
            let trans_idx: Vec<usize> = labels.windows(2).map(|w| w[0] * l + w[1]).collect();
            let tr = tape.pick(self.transitions, &trans_idx)?;
            let tr = tape.sum(tr);
            total = tape.add(total, tr)?;
        }
        let st = tape.pick(self.start, &[labels[0]])?;
        let st = tape.sum(st);
        let en = tape.pick(self.end, &[labels[t - 1]])?;
        let en = tape.sum(en);
        let total = tape.add(total, st)?;
        tape.add(total, en)
    }

    /// Taped negative log-likelihood `log Z − score(gold)`.
    pub fn nll(&self, tape: &mut Tape, emissions: Var, gold: &[usize]) -> Result<Var> {
        let gold_score = self.path_score(tape, emissions, gold)?;
        let log_z = self.log_partition(tape, emissions)?;
        tape.sub(log_z, gold_score)
    }
}
