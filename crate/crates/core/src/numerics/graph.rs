//! Reverse-mode tape over flat `f64` vectors.
//!
//! A [`Graph`] records every operation eagerly: each call computes its value
//! immediately and appends a node. [`Graph::backward`] walks the nodes in
//! reverse and accumulates parameter gradients into a [`GradBuffer`]. The
//! graph only borrows the parameter store, so several graphs may read the
//! same frozen parameters at once.

use super::store::{GradBuffer, ParamId, ParameterStore};
use super::tensor::{axpy, dot};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Embed { table: ParamId, row: usize },
    Affine { w: ParamId, b: Option<ParamId>, x: NodeId },
    Tanh(NodeId),
    Sigmoid(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Concat(Vec<NodeId>),
    Slice { x: NodeId, start: usize },
    Softmax(NodeId),
    LogSoftmax(NodeId),
    CrossEntropy { logits: NodeId, target: usize },
    Pick { x: NodeId, index: usize },
    Sum(NodeId),
    LinComb(Vec<(NodeId, f64)>),
    WeightedSum { items: Vec<NodeId>, weights: NodeId },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

pub struct Graph<'a> {
    store: &'a ParameterStore,
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn log_softmax_into(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = x.iter().map(|v| (v - max).exp()).sum();
    let log_z = max + sum.ln();
    x.iter().map(|v| v - log_z).collect()
}

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParameterStore) -> Self {
        Graph { store, nodes: Vec::with_capacity(256) }
    }

    pub fn store(&self) -> &'a ParameterStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    fn check(&self, id: NodeId) -> Result<&[f64]> {
        self.nodes.get(id.0).map(|n| n.value.as_slice()).ok_or(Error::UnknownNode(id.0))
    }

    fn push(&mut self, op: Op, value: Vec<f64>, name: &'static str) -> Result<NodeId> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("output of {name}")));
        }
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Constant input; no gradient flows out of it.
    pub fn input(&mut self, tensor: &Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, tensor.values().to_vec(), "input")
    }

    pub fn constant(&mut self, values: Vec<f64>) -> Result<NodeId> {
        if values.is_empty() {
            return Err(shape_err("constant", "empty vector".into()));
        }
        self.push(Op::Leaf, values, "constant")
    }

    /// A parameter viewed as a flat vector.
    pub fn param(&mut self, id: ParamId) -> Result<NodeId> {
        let v = self.store.value(id).values().to_vec();
        self.push(Op::Param(id), v, "param")
    }

    /// Row `row` of a `[rows, dim]` embedding table.
    pub fn embed(&mut self, table: ParamId, row: usize) -> Result<NodeId> {
        let t = self.store.value(table);
        if t.shape().len() != 2 {
            return Err(shape_err("embed", format!("table must be 2-d, got {:?}", t.shape())));
        }
        if row >= t.rows() {
            return Err(Error::TokenOutOfRange { id: row, size: t.rows() });
        }
        let d = t.cols();
        let v = t.values()[row * d..(row + 1) * d].to_vec();
        self.push(Op::Embed { table, row }, v, "embed")
    }

    /// `w · x + b` with `w` of shape `[m, n]`, `x` of length `n`, `b` of length `m`.
    pub fn affine(&mut self, w: ParamId, b: Option<ParamId>, x: NodeId) -> Result<NodeId> {
        let wt = self.store.value(w);
        let xv = self.check(x)?;
        if wt.shape().len() != 2 || wt.cols() != xv.len() {
            return Err(shape_err(
                "affine",
                format!("weight {:?} against input of length {}", wt.shape(), xv.len()),
            ));
        }
        let (m, n) = (wt.rows(), wt.cols());
        let wv = wt.values();
        let mut out: Vec<f64> = (0..m).map(|i| dot(&wv[i * n..(i + 1) * n], xv)).collect();
        if let Some(b) = b {
            let bv = self.store.value(b).values();
            if bv.len() != m {
                return Err(shape_err("affine", format!("bias length {} for {m} rows", bv.len())));
            }
            for (o, bi) in out.iter_mut().zip(bv) {
                *o += bi;
            }
        }
        self.push(Op::Affine { w, b, x }, out, "affine")
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.check(x)?.iter().map(|v| v.tanh()).collect();
        self.push(Op::Tanh(x), v, "tanh")
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.check(x)?.iter().map(|&v| sigmoid(v)).collect();
        self.push(Op::Sigmoid(x), v, "sigmoid")
    }

    fn binary(
        &mut self,
        a: NodeId,
        b: NodeId,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Vec<f64>> {
        let av = self.check(a)?;
        let bv = self.check(b)?;
        if av.len() != bv.len() {
            return Err(shape_err(name, format!("lengths {} and {}", av.len(), bv.len())));
        }
        Ok(av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.binary(a, b, "add", |x, y| x + y)?;
        self.push(Op::Add(a, b), v, "add")
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.binary(a, b, "sub", |x, y| x - y)?;
        self.push(Op::Sub(a, b), v, "sub")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.binary(a, b, "mul", |x, y| x * y)?;
        self.push(Op::Mul(a, b), v, "mul")
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(shape_err("concat", "no inputs".into()));
        }
        let mut v = Vec::new();
        for &p in parts {
            v.extend_from_slice(self.check(p)?);
        }
        self.push(Op::Concat(parts.to_vec()), v, "concat")
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xv = self.check(x)?;
        if len == 0 || start + len > xv.len() {
            return Err(shape_err("slice", format!("[{start}, {}) of length {}", start + len, xv.len())));
        }
        let v = xv[start..start + len].to_vec();
        self.push(Op::Slice { x, start }, v, "slice")
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let v: Vec<f64> = log_softmax_into(self.check(x)?).into_iter().map(f64::exp).collect();
        self.push(Op::Softmax(x), v, "softmax")
    }

    pub fn log_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let v = log_softmax_into(self.check(x)?);
        self.push(Op::LogSoftmax(x), v, "log_softmax")
    }

    /// `-log softmax(logits)[target]` as a one-element node.
    pub fn cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId> {
        let lv = self.check(logits)?;
        if target >= lv.len() {
            return Err(Error::TokenOutOfRange { id: target, size: lv.len() });
        }
        let v = -log_softmax_into(lv)[target];
        self.push(Op::CrossEntropy { logits, target }, vec![v], "cross_entropy")
    }

    /// Element `index` of `x` as a one-element node.
    pub fn pick(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let xv = self.check(x)?;
        if index >= xv.len() {
            return Err(Error::TokenOutOfRange { id: index, size: xv.len() });
        }
        let v = xv[index];
        self.push(Op::Pick { x, index }, vec![v], "pick")
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let v: f64 = self.check(x)?.iter().sum();
        self.push(Op::Sum(x), vec![v], "sum")
    }

    /// `Σ c_i x_i`, accumulated left to right from zero.
    pub fn lin_comb(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId> {
        let Some(&(first, _)) = terms.first() else {
            return Err(shape_err("lin_comb", "no terms".into()));
        };
        let n = self.check(first)?.len();
        let mut out = vec![0.0; n];
        for &(id, c) in terms {
            let v = self.check(id)?;
            if v.len() != n {
                return Err(shape_err("lin_comb", format!("lengths {n} and {}", v.len())));
            }
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        self.push(Op::LinComb(terms.to_vec()), out, "lin_comb")
    }

    /// `Σ_j weights[j] · items[j]` where `weights` is a node of length `items.len()`.
    pub fn weighted_sum(&mut self, items: &[NodeId], weights: NodeId) -> Result<NodeId> {
        let wv = self.check(weights)?.to_vec();
        if wv.len() != items.len() || items.is_empty() {
            return Err(shape_err(
                "weighted_sum",
                format!("{} weights for {} items", wv.len(), items.len()),
            ));
        }
        let n = self.check(items[0])?.len();
        let mut out = vec![0.0; n];
        for (&id, &w) in items.iter().zip(&wv) {
            let v = self.check(id)?;
            if v.len() != n {
                return Err(shape_err("weighted_sum", format!("lengths {n} and {}", v.len())));
            }
            axpy(w, v, &mut out);
        }
        self.push(Op::WeightedSum { items: items.to_vec(), weights }, out, "weighted_sum")
    }

    /// Back-propagates `seed · d(loss)/d(params)` into `grads`. `loss` must be
    /// a one-element node of this graph.
    pub fn backward(&self, loss: NodeId, seed: f64, grads: &mut GradBuffer) -> Result<()> {
        let node = self.nodes.get(loss.0).ok_or(Error::UnknownNode(loss.0))?;
        if node.value.len() != 1 {
            return Err(shape_err("backward", format!("loss has {} elements", node.value.len())));
        }
        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); loss.0 + 1];
        adj[loss.0] = vec![seed];

        fn acc<'v>(adj: &'v mut [Vec<f64>], id: NodeId, len: usize) -> &'v mut [f64] {
            let slot = &mut adj[id.0];
            if slot.is_empty() {
                *slot = vec![0.0; len];
            }
            slot
        }

        for i in (0..=loss.0).rev() {
            if adj[i].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut adj[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => axpy(1.0, &g, grads.slot_mut(*p)),
                Op::Embed { table, row } => {
                    let d = g.len();
                    let slot = grads.slot_mut(*table);
                    axpy(1.0, &g, &mut slot[row * d..(row + 1) * d]);
                }
                Op::Affine { w, b, x } => {
                    let wt = self.store.value(*w);
                    let (m, n) = (wt.rows(), wt.cols());
                    let wv = wt.values();
                    let xv = &self.nodes[x.0].value;
                    if !matches!(self.nodes[x.0].op, Op::Leaf) {
                        let dx = acc(&mut adj, *x, n);
                        for r in 0..m {
                            if g[r] != 0.0 {
                                axpy(g[r], &wv[r * n..(r + 1) * n], dx);
                            }
                        }
                    }
                    let dw = grads.slot_mut(*w);
                    for r in 0..m {
                        if g[r] != 0.0 {
                            axpy(g[r], xv, &mut dw[r * n..(r + 1) * n]);
                        }
                    }
                    if let Some(b) = b {
                        axpy(1.0, &g, grads.slot_mut(*b));
                    }
                }
                Op::Tanh(x) => {
                    let dx = acc(&mut adj, *x, g.len());
                    for ((d, gi), y) in dx.iter_mut().zip(&g).zip(&node.value) {
                        *d += gi * (1.0 - y * y);
                    }
                }
                Op::Sigmoid(x) => {
                    let dx = acc(&mut adj, *x, g.len());
                    for ((d, gi), y) in dx.iter_mut().zip(&g).zip(&node.value) {
                        *d += gi * y * (1.0 - y);
                    }
                }
                Op::Add(a, b) => {
                    axpy(1.0, &g, acc(&mut adj, *a, g.len()));
                    axpy(1.0, &g, acc(&mut adj, *b, g.len()));
                }
                Op::Sub(a, b) => {
                    axpy(1.0, &g, acc(&mut adj, *a, g.len()));
                    axpy(-1.0, &g, acc(&mut adj, *b, g.len()));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    {
                        let da = acc(&mut adj, *a, g.len());
                        for ((d, gi), y) in da.iter_mut().zip(&g).zip(bv) {
                            *d += gi * y;
                        }
                    }
                    let db = acc(&mut adj, *b, g.len());
                    for ((d, gi), x) in db.iter_mut().zip(&g).zip(av) {
                        *d += gi * x;
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        axpy(1.0, &g[offset..offset + n], acc(&mut adj, *p, n));
                        offset += n;
                    }
                }
                Op::Slice { x, start } => {
                    let n = self.nodes[x.0].value.len();
                    let dx = acc(&mut adj, *x, n);
                    axpy(1.0, &g, &mut dx[*start..*start + g.len()]);
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let gy = dot(&g, y);
                    let dx = acc(&mut adj, *x, g.len());
                    for ((d, gi), yi) in dx.iter_mut().zip(&g).zip(y) {
                        *d += yi * (gi - gy);
                    }
                }
                Op::LogSoftmax(x) => {
                    let total: f64 = g.iter().sum();
                    let dx = acc(&mut adj, *x, g.len());
                    for ((d, gi), yi) in dx.iter_mut().zip(&g).zip(&node.value) {
                        *d += gi - yi.exp() * total;
                    }
                }
                Op::CrossEntropy { logits, target } => {
                    let lv = &self.nodes[logits.0].value;
                    let p: Vec<f64> = log_softmax_into(lv).into_iter().map(f64::exp).collect();
                    let dx = acc(&mut adj, *logits, lv.len());
                    for (j, (d, pj)) in dx.iter_mut().zip(&p).enumerate() {
                        let onehot = if j == *target { 1.0 } else { 0.0 };
                        *d += g[0] * (pj - onehot);
                    }
                }
                Op::Pick { x, index } => {
                    let n = self.nodes[x.0].value.len();
                    acc(&mut adj, *x, n)[*index] += g[0];
                }
                Op::Sum(x) => {
                    let n = self.nodes[x.0].value.len();
                    acc(&mut adj, *x, n).iter_mut().for_each(|d| *d += g[0]);
                }
                Op::LinComb(terms) => {
                    for &(id, c) in terms {
                        axpy(c, &g, acc(&mut adj, id, g.len()));
                    }
                }
                Op::WeightedSum { items, weights } => {
                    let wv = self.nodes[weights.0].value.clone();
                    let mut dw = vec![0.0; items.len()];
                    for (j, (&id, &w)) in items.iter().zip(&wv).enumerate() {
                        dw[j] = dot(&g, &self.nodes[id.0].value);
                        axpy(w, &g, acc(&mut adj, id, g.len()));
                    }
                    axpy(1.0, &dw, acc(&mut adj, *weights, items.len()));
                }
            }
        }
        Ok(())
    }
}
