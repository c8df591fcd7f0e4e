//! Tape-style reverse-mode differentiation over dense matrices.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and the backward pass is a single reverse sweep.

use std::rc::Rc;

use super::matrix::gemm;
use super::{Matrix, NumericsError};

/// Target index that [`Graph::cross_entropy`] skips.
pub const IGNORE_TARGET: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param,
    MatMul { a: NodeId, b: NodeId, ta: bool, tb: bool },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow { a: NodeId, row: NodeId },
    AddConst { a: NodeId, c: Rc<Matrix> },
    Transpose(NodeId),
    Softmax(NodeId),
    LayerNorm { x: NodeId, gain: Option<NodeId>, bias: Option<NodeId>, eps: f64 },
    Silu(NodeId),
    Scale(NodeId, f64),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    Block { a: NodeId, r0: usize, c0: usize, rows: usize, cols: usize },
    Gather { table: NodeId, ids: Rc<[usize]> },
    CrossEntropy { logits: NodeId, targets: Rc<[usize]> },
    Rotary { x: NodeId, cos: Rc<Matrix>, sin: Rc<Matrix> },
    Sum(NodeId),
}

/// Values kept from the forward pass for the backward rule.
#[derive(Debug, Clone, Default)]
enum Cache {
    #[default]
    None,
    Norm { xhat: Matrix, inv_std: Vec<f64> },
    Probs { probs: Matrix, counted: usize },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
    cache: Cache,
    needs_grad: bool,
}

/// A recorded computation; see the module docs.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; never receives a gradient.
    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Input, value, Cache::None, false)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Param, value, Cache::None, true)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    /// Gradient of the last backward root with respect to `id`, if it was reached.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Overwrites a leaf value. Call [`Graph::recompute`] to refresh dependents.
    pub fn set_leaf(&mut self, id: NodeId, value: Matrix) -> Result<(), NumericsError> {
        let node = &mut self.nodes[id.0];
        if !matches!(node.op, Op::Input | Op::Param) {
            return Err(NumericsError::InvalidArgument(format!(
                "node {} is not a leaf",
                id.0
            )));
        }
        if node.value.shape() != value.shape() {
            return Err(NumericsError::shape("set_leaf", node.value.shape(), value.shape()));
        }
        node.value = value;
        Ok(())
    }

    pub(crate) fn leaf_mut(&mut self, id: NodeId) -> &mut Matrix {
        debug_assert!(matches!(self.nodes[id.0].op, Op::Input | Op::Param));
        &mut self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Matrix, cache: Cache, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            cache,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].needs_grad)
    }

    fn record(&mut self, op: Op) -> Result<NodeId, NumericsError> {
        let (value, cache) = self.evaluate(&op)?;
        let needs = self.needs(&op_inputs(&op));
        Ok(self.push(op, value, cache, needs))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.record(Op::MatMul { a, b, ta: false, tb: false })
    }

    /// `a * b^T` without materialising the transpose.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.record(Op::MatMul { a, b, ta: false, tb: true })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.record(Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumericsError> {
        self.record(Op::Mul(a, b))
    }

    /// Adds a `1 x cols` row vector to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, NumericsError> {
        self.record(Op::AddRow { a, row })
    }

    /// Adds a fixed matrix (masks, biases). May contain `-inf`.
    pub fn add_const(&mut self, a: NodeId, c: Rc<Matrix>) -> Result<NodeId, NumericsError> {
        self.record(Op::AddConst { a, c })
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        self.record(Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        self.record(Op::Softmax(a))
    }

    /// Per-row normalisation to zero mean and unit population variance, with
    /// optional learned `1 x cols` gain and bias.
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gain: Option<NodeId>,
        bias: Option<NodeId>,
        eps: f64,
    ) -> Result<NodeId, NumericsError> {
        self.record(Op::LayerNorm { x, gain, bias, eps })
    }

    pub fn silu(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        self.record(Op::Silu(a))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId, NumericsError> {
        self.record(Op::Scale(a, factor))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        self.record(Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, NumericsError> {
        self.record(Op::ConcatRows(parts.to_vec()))
    }

    /// Copies the sub-block `rows x cols` starting at `(r0, c0)`.
    pub fn block(
        &mut self,
        a: NodeId,
        r0: usize,
        c0: usize,
        rows: usize,
        cols: usize,
    ) -> Result<NodeId, NumericsError> {
        let (ar, ac) = self.shape(a);
        if r0 + rows > ar || c0 + cols > ac {
            return Err(NumericsError::InvalidArgument(format!(
                "block {rows}x{cols} at ({r0},{c0}) exceeds {ar}x{ac}"
            )));
        }
        self.record(Op::Block { a, r0, c0, rows, cols })
    }

    /// Embedding lookup: row `i` of the output is row `ids[i]` of `table`.
    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId, NumericsError> {
        self.record(Op::Gather {
            table,
            ids: ids.into(),
        })
    }

    /// Mean cross-entropy of row-wise softmax against integer targets.
    /// Rows whose target is [`IGNORE_TARGET`] are skipped.
    pub fn cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[usize],
    ) -> Result<NodeId, NumericsError> {
        self.record(Op::CrossEntropy {
            logits,
            targets: targets.into(),
        })
    }

    /// Half-split rotation: with halves `(x1, x2)` and per-row tables `cos`, `sin`
    /// of width `cols/2`, returns `(x1*cos - x2*sin, x2*cos + x1*sin)`.
    pub fn rotary(
        &mut self,
        x: NodeId,
        cos: Rc<Matrix>,
        sin: Rc<Matrix>,
    ) -> Result<NodeId, NumericsError> {
        self.record(Op::Rotary { x, cos, sin })
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId, NumericsError> {
        self.record(Op::Sum(a))
    }

    /// Re-evaluates every non-leaf node from current leaf values.
    pub fn recompute(&mut self) -> Result<(), NumericsError> {
        for i in 0..self.nodes.len() {
            let op = self.nodes[i].op.clone();
            if matches!(op, Op::Input | Op::Param) {
                continue;
            }
            let (value, cache) = self.evaluate(&op)?;
            self.nodes[i].value = value;
            self.nodes[i].cache = cache;
        }
        Ok(())
    }

    fn evaluate(&self, op: &Op) -> Result<(Matrix, Cache), NumericsError> {
        let v = |id: &NodeId| &self.nodes[id.0].value;
        let out = match op {
            Op::Input | Op::Param => unreachable!("leaves are not evaluated"),
            Op::MatMul { a, b, ta, tb } => {
                let (a, b) = (v(a), v(b));
                let (m, k) = if *ta { (a.cols(), a.rows()) } else { a.shape() };
                let (kb, n) = if *tb { (b.cols(), b.rows()) } else { b.shape() };
                if k != kb {
                    return Err(NumericsError::shape("matmul", (m, k), (kb, n)));
                }
                let mut out = Matrix::zeros(m, n);
                gemm(a, *ta, b, *tb, &mut out, 0.0);
                out
            }
            Op::Add(a, b) | Op::Mul(a, b) => {
                let (a, b) = (v(a), v(b));
                let name = if matches!(op, Op::Add(..)) { "add" } else { "mul" };
                if a.shape() != b.shape() {
                    return Err(NumericsError::shape(name, a.shape(), b.shape()));
                }
                let mut out = a.clone();
                if matches!(op, Op::Add(..)) {
                    out.add_assign(b);
                } else {
                    for (x, y) in out.data_mut().iter_mut().zip(b.data()) {
                        *x *= y;
                    }
                }
                out
            }
            Op::AddRow { a, row } => {
                let (a, row) = (v(a), v(row));
                if row.rows() != 1 || row.cols() != a.cols() {
                    return Err(NumericsError::shape("add_row", a.shape(), row.shape()));
                }
                let mut out = a.clone();
                for r in 0..out.rows() {
                    for (x, y) in out.row_mut(r).iter_mut().zip(row.data()) {
                        *x += y;
                    }
                }
                out
            }
            Op::AddConst { a, c } => {
                let a = v(a);
                if a.shape() != c.shape() {
                    return Err(NumericsError::shape("add_const", a.shape(), c.shape()));
                }
                let mut out = a.clone();
                out.add_assign(c);
                out
            }
            Op::Transpose(a) => v(a).transpose(),
            Op::Softmax(a) => {
                let mut out = v(a).clone();
                for r in 0..out.rows() {
                    softmax_in_place(out.row_mut(r));
                }
                out
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let x = v(x);
                let cols = x.cols();
                for p in [gain, bias].into_iter().flatten() {
                    let s = v(p).shape();
                    if s != (1, cols) {
                        return Err(NumericsError::shape("layer_norm", x.shape(), s));
                    }
                }
                let mut xhat = x.clone();
                let mut inv_std = Vec::with_capacity(x.rows());
                for r in 0..x.rows() {
                    let row = xhat.row_mut(r);
                    let mean = row.iter().sum::<f64>() / cols as f64;
                    let var = row.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / cols as f64;
                    let inv = 1.0 / (var + eps).sqrt();
                    for z in row.iter_mut() {
                        *z = (*z - mean) * inv;
                    }
                    inv_std.push(inv);
                }
                let mut out = xhat.clone();
                if let Some(g) = gain {
                    let g = v(g);
                    for r in 0..out.rows() {
                        for (z, s) in out.row_mut(r).iter_mut().zip(g.data()) {
                            *z *= s;
                        }
                    }
                }
                if let Some(b) = bias {
                    let b = v(b);
                    for r in 0..out.rows() {
                        for (z, s) in out.row_mut(r).iter_mut().zip(b.data()) {
                            *z += s;
                        }
                    }
                }
                return Ok((out, Cache::Norm { xhat, inv_std }));
            }
            Op::Silu(a) => v(a).map(|z| z * sigmoid(z)),
            Op::Scale(a, f) => v(a).map(|z| z * f),
            Op::ConcatCols(parts) => {
                let first = parts
                    .first()
                    .ok_or_else(|| NumericsError::InvalidArgument("empty concat".into()))?;
                let rows = v(first).rows();
                let mut cols = 0;
                for p in parts {
                    if v(p).rows() != rows {
                        return Err(NumericsError::shape("concat_cols", v(first).shape(), v(p).shape()));
                    }
                    cols += v(p).cols();
                }
                let mut out = Matrix::zeros(rows, cols);
                for r in 0..rows {
                    let mut c0 = 0;
                    let dst = out.row_mut(r);
                    for p in parts {
                        let src = v(p).row(r);
                        dst[c0..c0 + src.len()].copy_from_slice(src);
                        c0 += src.len();
                    }
                }
                out
            }
            Op::ConcatRows(parts) => {
                let first = parts
                    .first()
                    .ok_or_else(|| NumericsError::InvalidArgument("empty concat".into()))?;
                let cols = v(first).cols();
                let mut data = Vec::new();
                let mut rows = 0;
                for p in parts {
                    if v(p).cols() != cols {
                        return Err(NumericsError::shape("concat_rows", v(first).shape(), v(p).shape()));
                    }
                    rows += v(p).rows();
                    data.extend_from_slice(v(p).data());
                }
                Matrix::new(rows, cols, data)?
            }
            Op::Block { a, r0, c0, rows, cols } => {
                let src = v(a);
                let mut out = Matrix::zeros(*rows, *cols);
                for r in 0..*rows {
                    out.row_mut(r).copy_from_slice(&src.row(r0 + r)[*c0..c0 + cols]);
                }
                out
            }
            Op::Gather { table, ids } => {
                let t = v(table);
                let mut out = Matrix::zeros(ids.len(), t.cols());
                for (i, &id) in ids.iter().enumerate() {
                    if id >= t.rows() {
                        return Err(NumericsError::InvalidArgument(format!(
                            "gather index {id} out of range for {} rows",
                            t.rows()
                        )));
                    }
                    out.row_mut(i).copy_from_slice(t.row(id));
                }
                out
            }
            Op::CrossEntropy { logits, targets } => {
                let l = v(logits);
                if targets.len() != l.rows() {
                    return Err(NumericsError::shape("cross_entropy", l.shape(), (targets.len(), 1)));
                }
                let mut probs = l.clone();
                let mut total = 0.0;
                let mut counted = 0;
                for (r, &t) in targets.iter().enumerate() {
                    let row = probs.row_mut(r);
                    softmax_in_place(row);
                    if t == IGNORE_TARGET {
                        continue;
                    }
                    if t >= row.len() {
                        return Err(NumericsError::InvalidArgument(format!(
                            "target {t} out of range for {} classes",
                            row.len()
                        )));
                    }
                    // log-softmax straight from logits keeps tiny probabilities exact
                    let lr = l.row(r);
                    let max = lr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + lr.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                    total += lse - lr[t];
                    counted += 1;
                }
                let loss = if counted == 0 { 0.0 } else { total / counted as f64 };
                return Ok((Matrix::filled(1, 1, loss), Cache::Probs { probs, counted }));
            }
            Op::Rotary { x, cos, sin } => {
                let x = v(x);
                let half = x.cols() / 2;
                if x.cols() % 2 != 0 || cos.shape() != (x.rows(), half) || sin.shape() != cos.shape() {
                    return Err(NumericsError::shape("rotary", x.shape(), cos.shape()));
                }
                let mut out = Matrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let (xr, c, s) = (x.row(r), cos.row(r), sin.row(r));
                    let o = out.row_mut(r);
                    for j in 0..half {
                        let (x1, x2) = (xr[j], xr[j + half]);
                        o[j] = x1 * c[j] - x2 * s[j];
                        o[j + half] = x2 * c[j] + x1 * s[j];
                    }
                }
                out
            }
            Op::Sum(a) => Matrix::filled(1, 1, v(a).sum()),
        };
        Ok((out, Cache::None))
    }

    /// Reverse sweep from a `1 x 1` root. Afterwards [`Graph::grad`] holds
    /// `d root / d node` for every node the root depends on.
    pub fn backward(&mut self, root: NodeId) -> Result<(), NumericsError> {
        let shape = self.shape(root);
        if shape != (1, 1) {
            return Err(NumericsError::NonScalarRoot(shape.0, shape.1));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Matrix::filled(1, 1, 1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].needs_grad {
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[i];
        let val = |id: NodeId| &self.nodes[id.0].value;
        let wants = |id: NodeId| self.nodes[id.0].needs_grad;
        match &node.op {
            Op::Input | Op::Param => {}
            Op::MatMul { a, b, ta, tb } => {
                let (av, bv) = (val(*a), val(*b));
                if wants(*a) {
                    let slot = slot(grads, *a, av.shape());
                    match (ta, tb) {
                        (false, false) => gemm(g, false, bv, true, slot, 1.0),
                        (false, true) => gemm(g, false, bv, false, slot, 1.0),
                        (true, false) => gemm(bv, false, g, true, slot, 1.0),
                        (true, true) => gemm(bv, true, g, true, slot, 1.0),
                    }
                }
                if wants(*b) {
                    let slot = slot(grads, *b, bv.shape());
                    match (ta, tb) {
                        (false, false) => gemm(av, true, g, false, slot, 1.0),
                        (false, true) => gemm(g, true, av, false, slot, 1.0),
                        (true, false) => gemm(av, false, g, false, slot, 1.0),
                        (true, true) => gemm(g, true, av, true, slot, 1.0),
                    }
                }
            }
            Op::Add(a, b) => {
                for id in [*a, *b] {
                    if wants(id) {
                        slot(grads, id, g.shape()).add_assign(g);
                    }
                }
            }
            Op::Mul(a, b) => {
                for (id, other) in [(*a, *b), (*b, *a)] {
                    if wants(id) {
                        let o = val(other);
                        let s = slot(grads, id, g.shape());
                        for ((d, gi), oi) in s.data_mut().iter_mut().zip(g.data()).zip(o.data()) {
                            *d += gi * oi;
                        }
                    }
                }
            }
            Op::AddRow { a, row } => {
                if wants(*a) {
                    slot(grads, *a, g.shape()).add_assign(g);
                }
                if wants(*row) {
                    let s = slot(grads, *row, (1, g.cols()));
                    add_col_sums(s.data_mut(), g);
                }
            }
            Op::AddConst { a, .. } => {
                if wants(*a) {
                    slot(grads, *a, g.shape()).add_assign(g);
                }
            }
            Op::Transpose(a) => {
                if wants(*a) {
                    slot(grads, *a, val(*a).shape()).add_assign(&g.transpose());
                }
            }
            Op::Softmax(a) => {
                if wants(*a) {
                    let y = &node.value;
                    let s = slot(grads, *a, g.shape());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for ((d, p), q) in s.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *d += p * (q - dot);
                        }
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, .. } => {
                let Cache::Norm { xhat, inv_std } = &node.cache else {
                    unreachable!("layer norm cache")
                };
                if let Some(b) = bias {
                    if wants(*b) {
                        add_col_sums(slot(grads, *b, (1, g.cols())).data_mut(), g);
                    }
                }
                if let Some(gn) = gain {
                    if wants(*gn) {
                        let s = slot(grads, *gn, (1, g.cols()));
                        for r in 0..g.rows() {
                            for ((d, gi), xh) in s.data_mut().iter_mut().zip(g.row(r)).zip(xhat.row(r)) {
                                *d += gi * xh;
                            }
                        }
                    }
                }
                if wants(*x) {
                    let cols = g.cols() as f64;
                    let gain_v = gain.map(val);
                    let s = slot(grads, *x, g.shape());
                    let mut dxhat = vec![0.0; g.cols()];
                    for r in 0..g.rows() {
                        for (j, d) in dxhat.iter_mut().enumerate() {
                            *d = g.get(r, j) * gain_v.map_or(1.0, |gv| gv.data()[j]);
                        }
                        let xr = xhat.row(r);
                        let mean_d = dxhat.iter().sum::<f64>() / cols;
                        let mean_dx = dxhat.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / cols;
                        let inv = inv_std[r];
                        for ((o, d), xh) in s.row_mut(r).iter_mut().zip(&dxhat).zip(xr) {
                            *o += inv * (d - mean_d - xh * mean_dx);
                        }
                    }
                }
            }
            Op::Silu(a) => {
                if wants(*a) {
                    let x = val(*a);
                    let s = slot(grads, *a, g.shape());
                    for ((d, gi), xi) in s.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        let sg = sigmoid(*xi);
                        *d += gi * (sg + xi * sg * (1.0 - sg));
                    }
                }
            }
            Op::Scale(a, f) => {
                if wants(*a) {
                    let s = slot(grads, *a, g.shape());
                    for (d, gi) in s.data_mut().iter_mut().zip(g.data()) {
                        *d += gi * f;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for p in parts {
                    let w = val(*p).cols();
                    if wants(*p) {
                        let s = slot(grads, *p, val(*p).shape());
                        for r in 0..g.rows() {
                            for (d, gi) in s.row_mut(r).iter_mut().zip(&g.row(r)[c0..c0 + w]) {
                                *d += gi;
                            }
                        }
                    }
                    c0 += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = val(*p).len();
                    if wants(*p) {
                        let s = slot(grads, *p, val(*p).shape());
                        for (d, gi) in s.data_mut().iter_mut().zip(&g.data()[off..off + n]) {
                            *d += gi;
                        }
                    }
                    off += n;
                }
            }
            Op::Block { a, r0, c0, .. } => {
                if wants(*a) {
                    let s = slot(grads, *a, val(*a).shape());
                    for r in 0..g.rows() {
                        let dst = &mut s.row_mut(r0 + r)[*c0..c0 + g.cols()];
                        for (d, gi) in dst.iter_mut().zip(g.row(r)) {
                            *d += gi;
                        }
                    }
                }
            }
            Op::Gather { table, ids } => {
                if wants(*table) {
                    let s = slot(grads, *table, val(*table).shape());
                    for (i, &id) in ids.iter().enumerate() {
                        for (d, gi) in s.row_mut(id).iter_mut().zip(g.row(i)) {
                            *d += gi;
                        }
                    }
                }
            }
            Op::CrossEntropy { logits, targets } => {
                let Cache::Probs { probs, counted } = &node.cache else {
                    unreachable!("cross entropy cache")
                };
                if wants(*logits) && *counted > 0 {
                    let scale = g.get(0, 0) / *counted as f64;
                    let s = slot(grads, *logits, probs.shape());
                    for (r, &t) in targets.iter().enumerate() {
                        if t == IGNORE_TARGET {
                            continue;
                        }
                        for (j, (d, p)) in s.row_mut(r).iter_mut().zip(probs.row(r)).enumerate() {
                            let onehot = if j == t { 1.0 } else { 0.0 };
                            *d += scale * (p - onehot);
                        }
                    }
                }
            }
            Op::Rotary { x, cos, sin } => {
                if wants(*x) {
                    let half = g.cols() / 2;
                    let s = slot(grads, *x, g.shape());
                    for r in 0..g.rows() {
                        let (gr, c, sn) = (g.row(r), cos.row(r), sin.row(r));
                        let d = s.row_mut(r);
                        for j in 0..half {
                            let (g1, g2) = (gr[j], gr[j + half]);
                            d[j] += g1 * c[j] + g2 * sn[j];
                            d[j + half] += g2 * c[j] - g1 * sn[j];
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if wants(*a) {
                    let gv = g.get(0, 0);
                    for d in slot(grads, *a, val(*a).shape()).data_mut() {
                        *d += gv;
                    }
                }
            }
        }
    }
}

fn op_inputs(op: &Op) -> Vec<NodeId> {
    match op {
        Op::Input | Op::Param => vec![],
        Op::MatMul { a, b, .. } | Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
        Op::AddRow { a, row } => vec![*a, *row],
        Op::AddConst { a, .. }
        | Op::Transpose(a)
        | Op::Softmax(a)
        | Op::Silu(a)
        | Op::Scale(a, _)
        | Op::Block { a, .. }
        | Op::Sum(a) => vec![*a],
        Op::LayerNorm { x, gain, bias, .. } => {
            let mut v = vec![*x];
            v.extend(gain.iter().chain(bias.iter()));
            v
        }
        Op::ConcatCols(p) | Op::ConcatRows(p) => p.clone(),
        Op::Gather { table, .. } => vec![*table],
        Op::CrossEntropy { logits, .. } => vec![*logits],
        Op::Rotary { x, .. } => vec![*x],
    }
}

fn slot<'a>(grads: &'a mut [Option<Matrix>], id: NodeId, shape: (usize, usize)) -> &'a mut Matrix {
    grads[id.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1))
}

fn add_col_sums(dst: &mut [f64], g: &Matrix) {
    for r in 0..g.rows() {
        for (d, gi) in dst.iter_mut().zip(g.row(r)) {
            *d += gi;
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for z in row.iter_mut() {
        *z = (*z - max).exp();
        total += *z;
    }
    for z in row.iter_mut() {
        *z /= total;
    }
}
