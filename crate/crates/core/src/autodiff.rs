//! Reverse-mode automatic differentiation.
//!
//! Learnable tensors live in a [`ParamSet`]. A [`Tape`] borrows the set for
//! the duration of one forward/backward pass, records every operation, and
//! writes d(loss)/d(param) into a [`Gradients`] buffer on
//! [`Tape::backward`]. The tape is then dropped; parameter updates happen
//! outside of it.
//!
//! Broadcasting is limited to what the layers use: a scalar against any
//! tensor, a vector `[n]` against the rows of an `[m, n]` matrix, and a
//! column `[m, 1]` against an `[m, n]` matrix.

use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{axis_split, matmul_dims, matmul_raw, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// An ordered, named collection of learnable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
            trainable: true,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }

    /// Applies `value -= rate * grad` to every trainable parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, rate: f64) {
        for (i, buf) in grads.bufs.iter().enumerate() {
            let p = &mut self.params[i];
            if !p.trainable {
                continue;
            }
            match buf {
                GradBuf::Empty => {}
                GradBuf::Dense(g) => {
                    for (v, gv) in p.value.data_mut().iter_mut().zip(g) {
                        *v -= rate * gv;
                    }
                }
                GradBuf::Rows(rows) => {
                    for (&r, g) in rows {
                        for (v, gv) in p.value.row_mut(r).iter_mut().zip(g) {
                            *v -= rate * gv;
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum GradBuf {
    Empty,
    Dense(Vec<f64>),
    /// Row-sparse accumulation for embedding lookups.
    Rows(BTreeMap<usize, Vec<f64>>),
}

/// Gradient accumulators, one per parameter of a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    shapes: Vec<Vec<usize>>,
    bufs: Vec<GradBuf>,
}

impl Gradients {
    pub fn new(params: &ParamSet) -> Self {
        Gradients {
            shapes: params.params.iter().map(|p| p.value.shape().to_vec()).collect(),
            bufs: vec![GradBuf::Empty; params.len()],
        }
    }

    pub fn zero(&mut self) {
        for b in &mut self.bufs {
            *b = GradBuf::Empty;
        }
    }

    /// Dense copy of one parameter's gradient.
    pub fn dense(&self, id: ParamId) -> Tensor {
        let shape = &self.shapes[id.0];
        let mut t = Tensor::zeros(shape);
        match &self.bufs[id.0] {
            GradBuf::Empty => {}
            GradBuf::Dense(g) => t.data_mut().copy_from_slice(g),
            GradBuf::Rows(rows) => {
                for (&r, g) in rows {
                    t.row_mut(r).copy_from_slice(g);
                }
            }
        }
        t
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    pub fn scale(&mut self, factor: f64) {
        for b in &mut self.bufs {
            match b {
                GradBuf::Empty => {}
                GradBuf::Dense(g) => g.iter_mut().for_each(|v| *v *= factor),
                GradBuf::Rows(rows) => rows.values_mut().flat_map(|r| r.iter_mut()).for_each(|v| *v *= factor),
            }
        }
    }

    /// Rescales so the global L2 norm does not exceed `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.bufs.iter().flat_map(|b| -> Box<dyn Iterator<Item = f64> + '_> {
            match b {
                GradBuf::Empty => Box::new(std::iter::empty()),
                GradBuf::Dense(g) => Box::new(g.iter().copied()),
                GradBuf::Rows(rows) => Box::new(rows.values().flat_map(|r| r.iter().copied())),
            }
        })
    }

    fn add_dense(&mut self, id: ParamId, g: &[f64]) {
        let len: usize = self.shapes[id.0].iter().product();
        let buf = &mut self.bufs[id.0];
        if let GradBuf::Rows(rows) = buf {
            let width = *self.shapes[id.0].last().unwrap_or(&1);
            let mut dense = vec![0.0; len];
            for (&r, v) in rows.iter() {
                dense[r * width..(r + 1) * width].copy_from_slice(v);
            }
            *buf = GradBuf::Dense(dense);
        }
        match buf {
            GradBuf::Empty => *buf = GradBuf::Dense(g.to_vec()),
            GradBuf::Dense(d) => add_into(d, g),
            GradBuf::Rows(_) => unreachable!(),
        }
    }

    fn add_row(&mut self, id: ParamId, row: usize, g: &[f64]) {
        let width = g.len();
        match &mut self.bufs[id.0] {
            b @ GradBuf::Empty => {
                let mut rows = BTreeMap::new();
                rows.insert(row, g.to_vec());
                *b = GradBuf::Rows(rows);
            }
            GradBuf::Rows(rows) => add_into(rows.entry(row).or_insert_with(|| vec![0.0; width]), g),
            GradBuf::Dense(d) => add_into(&mut d[row * width..(row + 1) * width], g),
        }
    }
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    Scalar,
    Row,
    Column,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Sum(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Concat(Vec<Var>, usize),
    Slice(Var, usize),
    Stack(Vec<Var>),
    Pick(Var, Vec<usize>),
    GatherRows(Var, Vec<usize>),
    Unfold(Var, usize, usize),
    MaxAxis(Var, Vec<usize>),
    LogSumExpAxis(Var, usize),
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
}

/// A single-use recording of a computation over a borrowed [`ParamSet`].
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node<'p>>,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// The tape node for a parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Cow::Borrowed(&self.params.get(id).value),
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    fn broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let kind = if sa == sb {
            Broadcast::Same
        } else if self.value(b).len() == 1 && sb.len() <= 1 {
            Broadcast::Scalar
        } else if sa.len() == 2 && sb.len() == 1 && sb[0] == sa[1] {
            Broadcast::Row
        } else if sa.len() == 2 && sb.len() == 2 && sb[0] == sa[0] && sb[1] == 1 {
            Broadcast::Column
        } else {
            return Err(Error::Shape {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        };
        Ok(kind)
    }

    fn zip_broadcast(&self, a: Var, b: Var, kind: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let av = self.value(a);
        let bv = self.value(b).data();
        let cols = av.cols();
        let mut out = av.clone();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            let bi = match kind {
                Broadcast::Same => i,
                Broadcast::Scalar => 0,
                Broadcast::Row => i % cols,
                Broadcast::Column => i / cols,
            };
            *o = f(*o, bv[bi]);
        }
        out
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.broadcast("add", a, b)?;
        let out = self.zip_broadcast(a, b, kind, |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b, kind)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.broadcast("sub", a, b)?;
        let out = self.zip_broadcast(a, b, kind, |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b, kind)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.broadcast("mul", a, b)?;
        let out = self.zip_broadcast(a, b, kind, |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b, kind)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push(out, Op::Scale(a, factor))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// Matrix product. `[m,k]×[k,n]`, `[k]×[k,n] → [n]` and
    /// `[m,k]×[k] → [m]` are accepted.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k, n, shape) = matmul_dims(self.shape(a), self.shape(b))?;
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        Ok(self.push(Tensor::new(shape, data)?, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.rank() != 2 {
            return Err(Error::InvalidAxis {
                axis: 1,
                rank: v.rank(),
            });
        }
        let (r, c) = (v.shape()[0], v.shape()[1]);
        let out = Tensor::new(vec![c, r], transpose_raw(v.data(), r, c))?;
        Ok(self.push(out, Op::Transpose(a)))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self.shape(parts[0]).to_vec();
        axis_split(&first, axis)?;
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let ok = s.len() == first.len() && s.iter().zip(&first).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !ok {
                return Err(Error::Shape {
                    op: "concat",
                    left: first,
                    right: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let mut shape = first.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_split(&shape, axis)?;
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let (_, len, _) = axis_split(self.shape(p), axis)?;
                let chunk = len * inner;
                data.extend_from_slice(&self.value(p).data()[o * chunk..(o + 1) * chunk]);
            }
        }
        Ok(self.push(Tensor::new(shape, data)?, Op::Concat(parts.to_vec(), axis)))
    }

    /// `a[start..start + len]` of a vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let v = self.value(a);
        if v.rank() != 1 || start + len > v.len() || len == 0 {
            return Err(Error::Shape {
                op: "slice",
                left: v.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let out = Tensor::vector(v.data()[start..start + len].to_vec());
        Ok(self.push(out, Op::Slice(a, start)))
    }

    /// Row `i` of a matrix, as a vector.
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let v = self.value(a);
        if v.rank() != 2 || i >= v.shape()[0] {
            return Err(Error::Shape {
                op: "row",
                left: v.shape().to_vec(),
                right: vec![i],
            });
        }
        let out = Tensor::vector(v.row(i).to_vec());
        Ok(self.push(out, Op::Pick(a, (i * v.cols()..(i + 1) * v.cols()).collect())))
    }

    /// Stacks equally long vectors into a matrix, one per row.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let width = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(width * rows.len());
        for &r in rows {
            let v = self.value(r);
            if v.rank() != 1 || v.len() != width {
                return Err(Error::Shape {
                    op: "stack",
                    left: vec![width],
                    right: v.shape().to_vec(),
                });
            }
            data.extend_from_slice(v.data());
        }
        let out = Tensor::matrix(rows.len(), width, data)?;
        Ok(self.push(out, Op::Stack(rows.to_vec())))
    }

    /// Gathers elements by flat (row-major) index into a vector.
    pub fn pick(&mut self, a: Var, flat: &[usize]) -> Result<Var> {
        let v = self.value(a);
        if flat.is_empty() || flat.iter().any(|&i| i >= v.len()) {
            return Err(Error::Shape {
                op: "pick",
                left: v.shape().to_vec(),
                right: flat.to_vec(),
            });
        }
        let out = Tensor::vector(flat.iter().map(|&i| v.data()[i]).collect());
        Ok(self.push(out, Op::Pick(a, flat.to_vec())))
    }

    /// Embedding lookup: rows of an `[n, d]` matrix → `[k, d]`. When the
    /// source is a parameter, its gradient is accumulated row-sparsely.
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let v = self.value(a);
        if v.rank() != 2 || rows.is_empty() || rows.iter().any(|&r| r >= v.shape()[0]) {
            return Err(Error::Shape {
                op: "gather_rows",
                left: v.shape().to_vec(),
                right: rows.to_vec(),
            });
        }
        let d = v.cols();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            data.extend_from_slice(v.row(r));
        }
        let out = Tensor::matrix(rows.len(), d, data)?;
        Ok(self.push(out, Op::GatherRows(a, rows.to_vec())))
    }

    /// Sliding windows over the rows of `[n, d]`, zero-padded by `pad` rows
    /// on both ends: output row `p` is the concatenation of padded rows
    /// `p..p + window`, giving `[n + 2·pad − window + 1, window·d]`.
    pub fn unfold(&mut self, a: Var, window: usize, pad: usize) -> Result<Var> {
        let v = self.value(a);
        let padded = v.rows() + 2 * pad;
        if v.rank() != 2 || window == 0 || padded < window {
            return Err(Error::Shape {
                op: "unfold",
                left: v.shape().to_vec(),
                right: vec![window, pad],
            });
        }
        let (n, d) = (v.shape()[0], v.shape()[1]);
        let positions = padded - window + 1;
        let mut data = vec![0.0; positions * window * d];
        for p in 0..positions {
            for w in 0..window {
                let src = (p + w) as isize - pad as isize;
                if src >= 0 && (src as usize) < n {
                    let dst = p * window * d + w * d;
                    data[dst..dst + d].copy_from_slice(v.row(src as usize));
                }
            }
        }
        let out = Tensor::matrix(positions, window * d, data)?;
        Ok(self.push(out, Op::Unfold(a, window, pad)))
    }

    /// Maximum over `axis`. The gradient is routed to the lowest-index
    /// argmax.
    pub fn max_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let v = self.value(a);
        let (outer, len, inner) = axis_split(v.shape(), axis)?;
        let mut out = Vec::with_capacity(outer * inner);
        let mut arg = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut best = base;
                for k in 1..len {
                    let idx = base + k * inner;
                    if v.data()[idx] > v.data()[best] {
                        best = idx;
                    }
                }
                out.push(v.data()[best]);
                arg.push(best);
            }
        }
        let mut shape = v.shape().to_vec();
        shape.remove(axis);
        Ok(self.push(Tensor::new(shape, out)?, Op::MaxAxis(a, arg)))
    }

    /// `log Σ exp` over `axis`, evaluated with the max-subtraction trick.
    pub fn logsumexp_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let v = self.value(a);
        let (outer, len, inner) = axis_split(v.shape(), axis)?;
        let mut out = Vec::with_capacity(outer * inner);
        let mut buf = Vec::with_capacity(len);
        for o in 0..outer {
            for i in 0..inner {
                buf.clear();
                buf.extend((0..len).map(|k| v.data()[o * len * inner + i + k * inner]));
                out.push(logsumexp(&buf));
            }
        }
        let mut shape = v.shape().to_vec();
        shape.remove(axis);
        Ok(self.push(Tensor::new(shape, out)?, Op::LogSumExpAxis(a, axis)))
    }

    /// Accumulates d(loss)/d(param) for every parameter reachable from
    /// `loss` into `grads`. Non-trainable parameters are skipped.
    pub fn backward(&self, loss: Var, grads: &mut Gradients) -> Result<()> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        node_grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = node_grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let out = &node.value;
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    if self.params.get(*id).trainable {
                        grads.add_dense(*id, &g);
                    }
                }
                Op::Add(a, b, kind) => {
                    accumulate(&mut node_grads, *a, &g, self.value(*a).len());
                    let gb = reduce_broadcast(&g, *kind, out.cols(), self.value(*b).len());
                    accumulate(&mut node_grads, *b, &gb, gb.len());
                }
                Op::Sub(a, b, kind) => {
                    accumulate(&mut node_grads, *a, &g, g.len());
                    let mut gb = reduce_broadcast(&g, *kind, out.cols(), self.value(*b).len());
                    gb.iter_mut().for_each(|v| *v = -*v);
                    accumulate(&mut node_grads, *b, &gb, gb.len());
                }
                Op::Mul(a, b, kind) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    let cols = out.cols();
                    let bidx = |i: usize| match kind {
                        Broadcast::Same => i,
                        Broadcast::Scalar => 0,
                        Broadcast::Row => i % cols,
                        Broadcast::Column => i / cols,
                    };
                    let ga: Vec<f64> = g.iter().enumerate().map(|(i, gi)| gi * bv[bidx(i)]).collect();
                    let full: Vec<f64> = g.iter().zip(av).map(|(gi, ai)| gi * ai).collect();
                    let gb = reduce_broadcast(&full, *kind, cols, bv.len());
                    accumulate(&mut node_grads, *a, &ga, ga.len());
                    accumulate(&mut node_grads, *b, &gb, gb.len());
                }
                Op::Scale(a, f) => {
                    let ga: Vec<f64> = g.iter().map(|v| v * f).collect();
                    accumulate(&mut node_grads, *a, &ga, ga.len());
                }
                Op::Tanh(a) => {
                    let ga: Vec<f64> = g.iter().zip(out.data()).map(|(gi, y)| gi * (1.0 - y * y)).collect();
                    accumulate(&mut node_grads, *a, &ga, ga.len());
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<f64> = g.iter().zip(out.data()).map(|(gi, y)| gi * y * (1.0 - y)).collect();
                    accumulate(&mut node_grads, *a, &ga, ga.len());
                }
                Op::Relu(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(self.value(*a).data())
                        .map(|(gi, x)| if *x > 0.0 { *gi } else { 0.0 })
                        .collect();
                    accumulate(&mut node_grads, *a, &ga, ga.len());
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    accumulate(&mut node_grads, *a, &vec![g[0]; n], n);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k, n, _) = matmul_dims(av.shape(), bv.shape())?;
                    // dA = G·Bᵀ, dB = Aᵀ·G
                    let bt = transpose_raw(bv.data(), k, n);
                    let ga = matmul_raw(&g, &bt, m, n, k);
                    let at = transpose_raw(av.data(), m, k);
                    let gb = matmul_raw(&at, &g, k, m, n);
                    accumulate(&mut node_grads, *a, &ga, ga.len());
                    accumulate(&mut node_grads, *b, &gb, gb.len());
                }
                Op::Transpose(a) => {
                    let (r, c) = (out.shape()[0], out.shape()[1]);
                    let ga = transpose_raw(&g, r, c);
                    accumulate(&mut node_grads, *a, &ga, ga.len());
                }
                Op::Reshape(a) => accumulate(&mut node_grads, *a, &g, g.len()),
                Op::Concat(parts, axis) => {
                    let (outer, total, inner) = axis_split(out.shape(), *axis)?;
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.shape(p)[*axis];
                        let mut gp = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let start = o * total * inner + offset * inner;
                            gp.extend_from_slice(&g[start..start + len * inner]);
                        }
                        offset += len;
                        accumulate(&mut node_grads, p, &gp, gp.len());
                    }
                }
                Op::Slice(a, start) => {
                    let n = self.value(*a).len();
                    let mut ga = vec![0.0; n];
                    ga[*start..*start + g.len()].copy_from_slice(&g);
                    accumulate(&mut node_grads, *a, &ga, n);
                }
                Op::Stack(rows) => {
                    let w = out.cols();
                    for (i, &r) in rows.iter().enumerate() {
                        accumulate(&mut node_grads, r, &g[i * w..(i + 1) * w], w);
                    }
                }
                Op::Pick(a, flat) => {
                    let n = self.value(*a).len();
                    let slot = node_grads[a.0].get_or_insert_with(|| vec![0.0; n]);
                    for (gi, &i) in g.iter().zip(flat) {
                        slot[i] += gi;
                    }
                }
                Op::GatherRows(a, rows) => {
                    let d = out.cols();
                    if let Op::Param(id) = self.nodes[a.0].op {
                        if self.params.get(id).trainable {
                            for (i, &r) in rows.iter().enumerate() {
                                grads.add_row(id, r, &g[i * d..(i + 1) * d]);
                            }
                        }
                    } else {
                        let n = self.value(*a).len();
                        let slot = node_grads[a.0].get_or_insert_with(|| vec![0.0; n]);
                        for (i, &r) in rows.iter().enumerate() {
                            add_into(&mut slot[r * d..(r + 1) * d], &g[i * d..(i + 1) * d]);
                        }
                    }
                }
                Op::Unfold(a, window, pad) => {
                    let av = self.value(*a);
                    let (n, d) = (av.shape()[0], av.shape()[1]);
                    let positions = out.shape()[0];
                    let slot = node_grads[a.0].get_or_insert_with(|| vec![0.0; n * d]);
                    for p in 0..positions {
                        for w in 0..*window {
                            let src = (p + w) as isize - *pad as isize;
                            if src >= 0 && (src as usize) < n {
                                let s = src as usize;
                                let from = p * window * d + w * d;
                                add_into(&mut slot[s * d..(s + 1) * d], &g[from..from + d]);
                            }
                        }
                    }
                }
                Op::MaxAxis(a, arg) => {
                    let n = self.value(*a).len();
                    let slot = node_grads[a.0].get_or_insert_with(|| vec![0.0; n]);
                    for (gi, &i) in g.iter().zip(arg) {
                        slot[i] += gi;
                    }
                }
                Op::LogSumExpAxis(a, axis) => {
                    let av = self.value(*a);
                    let (outer, len, inner) = axis_split(av.shape(), *axis)?;
                    let slot = node_grads[a.0].get_or_insert_with(|| vec![0.0; av.len()]);
                    for o in 0..outer {
                        for i in 0..inner {
                            let r = o * inner + i;
                            let lse = out.data()[r];
                            for k in 0..len {
                                let idx = o * len * inner + i + k * inner;
                                slot[idx] += g[r] * (av.data()[idx] - lse).exp();
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn accumulate(node_grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64], len: usize) {
    debug_assert_eq!(g.len(), len);
    match &mut node_grads[v.0] {
        Some(existing) => add_into(existing, g),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn reduce_broadcast(g: &[f64], kind: Broadcast, cols: usize, target: usize) -> Vec<f64> {
    match kind {
        Broadcast::Same => g.to_vec(),
        Broadcast::Scalar => vec![g.iter().sum()],
        Broadcast::Row => {
            let mut out = vec![0.0; target];
            for (i, v) in g.iter().enumerate() {
                out[i % cols] += v;
            }
            out
        }
        Broadcast::Column => {
            let mut out = vec![0.0; target];
            for (i, v) in g.iter().enumerate() {
                out[i / cols] += v;
            }
            out
        }
    }
}

fn transpose_raw(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `log Σ exp(xs)`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
