use std::cell::{Cell, Ref, RefCell};
use std::fmt;

use rand::Rng;

use super::{Scalar, Shape, Tensor, View};
use crate::error::{Error, Result};

/// Softmax / reduction axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Normalize down each column.
    Rows,
    /// Normalize across each row.
    Cols,
}

enum Op<T> {
    Leaf,
    MatMul { a: usize, b: usize, ta: bool, tb: bool },
    Add { a: usize, b: usize },
    AddRow { a: usize, row: usize },
    Scale { a: usize, s: T },
    ConcatCols { parts: Vec<usize> },
    SliceCols { a: usize, start: usize },
    SliceRows { a: usize, start: usize },
    Transpose { a: usize },
    Softmax { a: usize, axis: Axis },
    LayerNorm { x: usize, gain: usize, bias: usize, xhat: Vec<T>, inv_std: Vec<T> },
    Relu { a: usize },
    Embedding { table: usize, ids: Vec<usize> },
    MaskedFill { a: usize, mask: Vec<bool> },
    Dropout { a: usize, keep: Vec<T> },
    Sum { a: usize },
    CrossEntropy { logits: usize, probs: Vec<T>, targets: Vec<usize>, ignore: usize, count: usize },
}

struct Node<T> {
    shape: Shape,
    value: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records operations for reverse-mode differentiation.
///
/// A tape built with [`Tape::inference`] records values only; nothing on it
/// requires gradients, so no backward state is kept.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
    record: bool,
    consumed: Cell<bool>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}", self.id)
    }
}

/// Gradients of a scalar loss with respect to every leaf that requires them.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var<'_, T>) -> Option<&Tensor<T>> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var<'_, T>) -> Option<Tensor<T>> {
        self.grads.get_mut(var.id).and_then(|g| g.take())
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: RefCell::new(Vec::new()), record: true, consumed: Cell::new(false) }
    }

    pub fn inference() -> Self {
        Tape { nodes: RefCell::new(Vec::new()), record: false, consumed: Cell::new(false) }
    }

    pub fn is_recording(&self) -> bool {
        self.record
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every recorded node, allowing the tape to be reused.
    pub fn reset(&self) {
        self.nodes.borrow_mut().clear();
        self.consumed.set(false);
    }

    pub fn leaf(&self, tensor: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        let shape = tensor.shape();
        let value = tensor.into_data();
        self.push(shape, value, Op::Leaf, requires_grad && self.record)
    }

    pub fn constant(&self, tensor: Tensor<T>) -> Var<'_, T> {
        self.leaf(tensor, false)
    }

    pub fn param(&self, tensor: &Tensor<T>, trainable: bool) -> Var<'_, T> {
        self.leaf(tensor.clone(), trainable)
    }

    fn push(&self, shape: Shape, value: Vec<T>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        debug_assert_eq!(value.len(), shape[0] * shape[1]);
        let op = if requires_grad || matches!(op, Op::Leaf) { op } else { Op::Leaf };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { shape, value, op, requires_grad });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn shape_of(&self, id: usize) -> Shape {
        self.nodes.borrow()[id].shape
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        self.record && ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Back-propagates from a scalar `loss`. May be called once per tape
    /// until [`Tape::reset`].
    pub fn backward(&self, loss: Var<'_, T>) -> Result<Gradients<T>> {
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].shape;
        if shape != [1, 1] {
            return Err(Error::NonScalarLoss(shape));
        }
        if self.consumed.get() {
            return Err(Error::BackwardConsumed);
        }
        self.consumed.set(true);

        let mut grads: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(vec![T::one()]);
        let mut out: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                out[id] = Some(Tensor::new(node.shape, g)?);
                continue;
            }
            backward_node(&nodes, node, &g, &mut grads);
        }
        Ok(Gradients { grads: out })
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Vec<T>>], nodes: &[Node<T>], id: usize, f: impl FnOnce(&mut [T])) {
    if !nodes[id].requires_grad {
        return;
    }
    let slot = grads[id].get_or_insert_with(|| vec![T::zero(); nodes[id].value.len()]);
    f(slot);
}

fn backward_node<T: Scalar>(nodes: &[Node<T>], node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
    let [rows, cols] = node.shape;
    match &node.op {
        Op::Leaf => {}
        &Op::MatMul { a, b, ta, tb } => {
            let (na, nb) = (&nodes[a], &nodes[b]);
            let av = {
                let v = View::new(&na.value, na.shape[0], na.shape[1]);
                if ta { v.t() } else { v }
            };
            let bv = {
                let v = View::new(&nb.value, nb.shape[0], nb.shape[1]);
                if tb { v.t() } else { v }
            };
            let gv = View::new(g, rows, cols);
            accumulate(grads, nodes, a, |ga| {
                if ta {
                    T::gemm(bv, gv.t(), ga, T::one());
                } else {
                    T::gemm(gv, bv.t(), ga, T::one());
                }
            });
            accumulate(grads, nodes, b, |gb| {
                if tb {
                    T::gemm(gv.t(), av, gb, T::one());
                } else {
                    T::gemm(av.t(), gv, gb, T::one());
                }
            });
        }
        &Op::Add { a, b } => {
            accumulate(grads, nodes, a, |ga| add_into(ga, g));
            accumulate(grads, nodes, b, |gb| add_into(gb, g));
        }
        &Op::AddRow { a, row } => {
            accumulate(grads, nodes, a, |ga| add_into(ga, g));
            accumulate(grads, nodes, row, |gr| {
                for r in 0..rows {
                    add_into(gr, &g[r * cols..(r + 1) * cols]);
                }
            });
        }
        &Op::Scale { a, s } => {
            accumulate(grads, nodes, a, |ga| {
                for (x, &gi) in ga.iter_mut().zip(g) {
                    *x += s * gi;
                }
            });
        }
        Op::ConcatCols { parts } => {
            let mut offset = 0;
            for &p in parts {
                let w = nodes[p].shape[1];
                accumulate(grads, nodes, p, |gp| {
                    for r in 0..rows {
                        add_into(&mut gp[r * w..(r + 1) * w], &g[r * cols + offset..r * cols + offset + w]);
                    }
                });
                offset += w;
            }
        }
        &Op::SliceCols { a, start } => {
            let src_cols = nodes[a].shape[1];
            accumulate(grads, nodes, a, |ga| {
                for r in 0..rows {
                    let dst = &mut ga[r * src_cols + start..r * src_cols + start + cols];
                    add_into(dst, &g[r * cols..(r + 1) * cols]);
                }
            });
        }
        &Op::SliceRows { a, start } => {
            accumulate(grads, nodes, a, |ga| {
                add_into(&mut ga[start * cols..(start + rows) * cols], g);
            });
        }
        &Op::Transpose { a } => {
            accumulate(grads, nodes, a, |ga| {
                // node is rows × cols; a is cols × rows
                for i in 0..rows {
                    for j in 0..cols {
                        ga[j * rows + i] += g[i * cols + j];
                    }
                }
            });
        }
        &Op::Softmax { a, axis } => {
            let y = &node.value;
            accumulate(grads, nodes, a, |ga| match axis {
                Axis::Cols => {
                    for r in 0..rows {
                        let span = r * cols..(r + 1) * cols;
                        let (yr, gr) = (&y[span.clone()], &g[span.clone()]);
                        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for (o, (&yi, &gi)) in ga[span].iter_mut().zip(yr.iter().zip(gr)) {
                            *o += yi * (gi - dot);
                        }
                    }
                }
                Axis::Rows => {
                    for c in 0..cols {
                        let dot: T = (0..rows).map(|r| y[r * cols + c] * g[r * cols + c]).sum();
                        for r in 0..rows {
                            let i = r * cols + c;
                            ga[i] += y[i] * (g[i] - dot);
                        }
                    }
                }
            });
        }
        Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
            let gain_v = &nodes[*gain].value;
            accumulate(grads, nodes, *gain, |gg| {
                for r in 0..rows {
                    for c in 0..cols {
                        gg[c] += g[r * cols + c] * xhat[r * cols + c];
                    }
                }
            });
            accumulate(grads, nodes, *bias, |gb| {
                for r in 0..rows {
                    add_into(gb, &g[r * cols..(r + 1) * cols]);
                }
            });
            accumulate(grads, nodes, *x, |gx| {
                let n = T::from_usize(cols).unwrap();
                let mut dxhat = vec![T::zero(); cols];
                for r in 0..rows {
                    let base = r * cols;
                    let mut sum = T::zero();
                    let mut sum_xhat = T::zero();
                    for c in 0..cols {
                        let d = g[base + c] * gain_v[c];
                        dxhat[c] = d;
                        sum += d;
                        sum_xhat += d * xhat[base + c];
                    }
                    let k = inv_std[r] / n;
                    for c in 0..cols {
                        gx[base + c] += k * (n * dxhat[c] - sum - xhat[base + c] * sum_xhat);
                    }
                }
            });
        }
        &Op::Relu { a } => {
            let x = &nodes[a].value;
            accumulate(grads, nodes, a, |ga| {
                for ((o, &xi), &gi) in ga.iter_mut().zip(x).zip(g) {
                    if xi > T::zero() {
                        *o += gi;
                    }
                }
            });
        }
        Op::Embedding { table, ids } => {
            accumulate(grads, nodes, *table, |gt| {
                for (r, &id) in ids.iter().enumerate() {
                    add_into(&mut gt[id * cols..(id + 1) * cols], &g[r * cols..(r + 1) * cols]);
                }
            });
        }
        Op::MaskedFill { a, mask } => {
            accumulate(grads, nodes, *a, |ga| {
                for ((o, &m), &gi) in ga.iter_mut().zip(mask).zip(g) {
                    if !m {
                        *o += gi;
                    }
                }
            });
        }
        Op::Dropout { a, keep } => {
            accumulate(grads, nodes, *a, |ga| {
                for ((o, &k), &gi) in ga.iter_mut().zip(keep).zip(g) {
                    *o += k * gi;
                }
            });
        }
        &Op::Sum { a } => {
            let s = g[0];
            accumulate(grads, nodes, a, |ga| ga.iter_mut().for_each(|v| *v += s));
        }
        Op::CrossEntropy { logits, probs, targets, ignore, count } => {
            let v = nodes[*logits].shape[1];
            let scale = g[0] / T::from_usize(*count).unwrap();
            accumulate(grads, nodes, *logits, |gl| {
                for (r, &t) in targets.iter().enumerate() {
                    if t == *ignore {
                        continue;
                    }
                    for c in 0..v {
                        let onehot = if c == t { T::one() } else { T::zero() };
                        gl[r * v + c] += scale * (probs[r * v + c] - onehot);
                    }
                }
            });
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> Shape {
        self.tape.shape_of(self.id)
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// Borrowed view of the forward value.
    pub fn data(&self) -> Ref<'t, [T]> {
        Ref::map(self.tape.nodes.borrow(), |n| n[self.id].value.as_slice())
    }

    pub fn value(&self) -> Tensor<T> {
        let nodes = self.tape.nodes.borrow();
        let n = &nodes[self.id];
        Tensor::new(n.shape, n.value.clone()).expect("node shape")
    }

    pub fn scalar(&self) -> T {
        self.data()[0]
    }

    fn same_tape(&self, other: &Var<'_, T>) {
        assert!(std::ptr::eq(self.tape, other.tape), "vars belong to different tapes");
    }

    fn unary(self, shape: Shape, value: Vec<T>, op: Op<T>) -> Var<'t, T> {
        let rg = self.tape.needs(&[self.id]);
        self.tape.push(shape, value, op, rg)
    }

    fn binary(self, other: Var<'t, T>, shape: Shape, value: Vec<T>, op: Op<T>) -> Var<'t, T> {
        self.same_tape(&other);
        let rg = self.tape.needs(&[self.id, other.id]);
        self.tape.push(shape, value, op, rg)
    }

    /// Matrix product `self · other`.
    pub fn matmul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.matmul_ex(other, false, false)
    }

    /// Matrix product `self · otherᵀ`.
    pub fn matmul_t(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.matmul_ex(other, false, true)
    }

    fn matmul_ex(self, other: Var<'t, T>, ta: bool, tb: bool) -> Result<Var<'t, T>> {
        let (sa, sb) = (self.shape(), other.shape());
        let (m, ka) = if ta { (sa[1], sa[0]) } else { (sa[0], sa[1]) };
        let (kb, n) = if tb { (sb[1], sb[0]) } else { (sb[0], sb[1]) };
        if ka != kb {
            return Err(Error::ShapeMismatch { op: "matmul", left: sa, right: sb });
        }
        let mut out = vec![T::zero(); m * n];
        {
            let nodes = self.tape.nodes.borrow();
            let av = View::new(&nodes[self.id].value, sa[0], sa[1]);
            let bv = View::new(&nodes[other.id].value, sb[0], sb[1]);
            T::gemm(if ta { av.t() } else { av }, if tb { bv.t() } else { bv }, &mut out, T::zero());
        }
        Ok(self.binary(other, [m, n], out, Op::MatMul { a: self.id, b: other.id, ta, tb }))
    }

    pub fn add(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa != sb {
            return Err(Error::ShapeMismatch { op: "add", left: sa, right: sb });
        }
        let value: Vec<T> = {
            let (a, b) = (self.data(), other.data());
            a.iter().zip(b.iter()).map(|(&x, &y)| x + y).collect()
        };
        Ok(self.binary(other, sa, value, Op::Add { a: self.id, b: other.id }))
    }

    /// Adds a `1 × cols` row to every row (bias broadcast).
    pub fn add_row(self, row: Var<'t, T>) -> Result<Var<'t, T>> {
        let (sa, sr) = (self.shape(), row.shape());
        if sr != [1, sa[1]] {
            return Err(Error::ShapeMismatch { op: "add_row", left: sa, right: sr });
        }
        let value: Vec<T> = {
            let (a, b) = (self.data(), row.data());
            a.chunks(sa[1].max(1)).flat_map(|r| r.iter().zip(b.iter()).map(|(&x, &y)| x + y)).collect()
        };
        Ok(self.binary(row, sa, value, Op::AddRow { a: self.id, row: row.id }))
    }

    pub fn scale(self, s: T) -> Var<'t, T> {
        let value: Vec<T> = self.data().iter().map(|&x| x * s).collect();
        self.unary(self.shape(), value, Op::Scale { a: self.id, s })
    }

    pub fn concat_cols(parts: &[Var<'t, T>]) -> Result<Var<'t, T>> {
        let first = *parts.first().ok_or_else(|| Error::InvalidArgument {
            op: "concat",
            msg: "no inputs".into(),
        })?;
        let rows = first.shape()[0];
        let mut cols = 0;
        for p in parts {
            first.same_tape(p);
            if p.shape()[0] != rows {
                return Err(Error::ShapeMismatch { op: "concat", left: first.shape(), right: p.shape() });
            }
            cols += p.shape()[1];
        }
        let mut value = Vec::with_capacity(rows * cols);
        {
            let nodes = first.tape.nodes.borrow();
            for r in 0..rows {
                for p in parts {
                    let w = nodes[p.id].shape[1];
                    value.extend_from_slice(&nodes[p.id].value[r * w..(r + 1) * w]);
                }
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let rg = first.tape.needs(&ids);
        Ok(first.tape.push([rows, cols], value, Op::ConcatCols { parts: ids }, rg))
    }

    pub fn slice_cols(self, start: usize, end: usize) -> Result<Var<'t, T>> {
        let [rows, cols] = self.shape();
        if start > end || end > cols {
            return Err(Error::InvalidArgument {
                op: "slice_cols",
                msg: format!("range {start}..{end} out of bounds for shape {:?}", [rows, cols]),
            });
        }
        let w = end - start;
        let mut value = Vec::with_capacity(rows * w);
        {
            let d = self.data();
            for r in 0..rows {
                value.extend_from_slice(&d[r * cols + start..r * cols + end]);
            }
        }
        Ok(self.unary([rows, w], value, Op::SliceCols { a: self.id, start }))
    }

    pub fn slice_rows(self, start: usize, end: usize) -> Result<Var<'t, T>> {
        let [rows, cols] = self.shape();
        if start > end || end > rows {
            return Err(Error::InvalidArgument {
                op: "slice_rows",
                msg: format!("range {start}..{end} out of bounds for shape {:?}", [rows, cols]),
            });
        }
        let value = self.data()[start * cols..end * cols].to_vec();
        Ok(self.unary([end - start, cols], value, Op::SliceRows { a: self.id, start }))
    }

    pub fn transpose(self) -> Var<'t, T> {
        let t = self.value().transpose();
        let shape = t.shape();
        self.unary(shape, t.into_data(), Op::Transpose { a: self.id })
    }

    /// Numerically stable softmax. Entries equal to −∞ receive exactly zero
    /// weight; a slice that is entirely −∞ is an error.
    pub fn softmax(self, axis: Axis) -> Result<Var<'t, T>> {
        let [rows, cols] = self.shape();
        let mut value = self.data().to_vec();
        let normalize = |idx: &mut dyn Iterator<Item = usize>, value: &mut Vec<T>| -> Result<()> {
            let idx: Vec<usize> = idx.collect();
            let max = idx.iter().map(|&i| value[i]).fold(T::neg_infinity(), T::max);
            if max == T::neg_infinity() {
                return Err(Error::EmptyAttentionSupport);
            }
            if !max.is_finite() {
                return Err(Error::InvalidArgument { op: "softmax", msg: "non-finite input".into() });
            }
            let mut sum = T::zero();
            for &i in &idx {
                let e = (value[i] - max).exp();
                value[i] = e;
                sum += e;
            }
            for &i in &idx {
                value[i] = value[i] / sum;
            }
            Ok(())
        };
        match axis {
            Axis::Cols => {
                for r in 0..rows {
                    normalize(&mut (r * cols..(r + 1) * cols), &mut value)?;
                }
            }
            Axis::Rows => {
                for c in 0..cols {
                    normalize(&mut (0..rows).map(|r| r * cols + c), &mut value)?;
                }
            }
        }
        Ok(self.unary([rows, cols], value, Op::Softmax { a: self.id, axis }))
    }

    /// Row-wise layer normalization followed by `gain`/`bias` (both `1 × cols`).
    pub fn layer_norm(self, gain: Var<'t, T>, bias: Var<'t, T>, eps: T) -> Result<Var<'t, T>> {
        let [rows, cols] = self.shape();
        for p in [gain, bias] {
            self.same_tape(&p);
            if p.shape() != [1, cols] {
                return Err(Error::ShapeMismatch { op: "layer_norm", left: [rows, cols], right: p.shape() });
            }
        }
        let n = T::from_usize(cols).unwrap();
        let mut xhat = vec![T::zero(); rows * cols];
        let mut inv_std = vec![T::zero(); rows];
        let mut value = vec![T::zero(); rows * cols];
        {
            let (x, gv, bv) = (self.data(), gain.data(), bias.data());
            for r in 0..rows {
                let row = &x[r * cols..(r + 1) * cols];
                let mean = row.iter().copied().sum::<T>() / n;
                let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
                let inv = (var + eps).sqrt().recip();
                inv_std[r] = inv;
                for c in 0..cols {
                    let h = (row[c] - mean) * inv;
                    xhat[r * cols + c] = h;
                    value[r * cols + c] = h * gv[c] + bv[c];
                }
            }
        }
        let rg = self.tape.needs(&[self.id, gain.id, bias.id]);
        let op = Op::LayerNorm { x: self.id, gain: gain.id, bias: bias.id, xhat, inv_std };
        Ok(self.tape.push([rows, cols], value, op, rg))
    }

    pub fn relu(self) -> Var<'t, T> {
        let value: Vec<T> = self.data().iter().map(|&x| x.max(T::zero())).collect();
        self.unary(self.shape(), value, Op::Relu { a: self.id })
    }

    /// Gathers rows of `self` (a `vocab × width` table) by id.
    pub fn embedding(self, ids: &[usize]) -> Result<Var<'t, T>> {
        let [vocab, width] = self.shape();
        let mut value = Vec::with_capacity(ids.len() * width);
        {
            let table = self.data();
            for &id in ids {
                if id >= vocab {
                    return Err(Error::InvalidArgument {
                        op: "embedding",
                        msg: format!("id {id} out of range for table of {vocab} rows"),
                    });
                }
                value.extend_from_slice(&table[id * width..(id + 1) * width]);
            }
        }
        Ok(self.unary([ids.len(), width], value, Op::Embedding { table: self.id, ids: ids.to_vec() }))
    }

    /// Replaces entries where `mask` is true with `fill`.
    pub fn masked_fill(self, mask: &[bool], fill: T) -> Result<Var<'t, T>> {
        let shape = self.shape();
        if mask.len() != shape[0] * shape[1] {
            return Err(Error::ShapeMismatch { op: "masked_fill", left: shape, right: [1, mask.len()] });
        }
        let value: Vec<T> =
            self.data().iter().zip(mask).map(|(&x, &m)| if m { fill } else { x }).collect();
        Ok(self.unary(shape, value, Op::MaskedFill { a: self.id, mask: mask.to_vec() }))
    }

    /// Inverted dropout; identity when `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(self, rate: f64, rng: &mut R) -> Var<'t, T> {
        if rate <= 0.0 {
            return self;
        }
        let scale = T::from_f64_lossy(1.0 / (1.0 - rate));
        let keep: Vec<T> = (0..self.data().len())
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { scale })
            .collect();
        let value: Vec<T> = self.data().iter().zip(&keep).map(|(&x, &k)| x * k).collect();
        self.unary(self.shape(), value, Op::Dropout { a: self.id, keep })
    }

    pub fn sum(self) -> Var<'t, T> {
        let s: T = self.data().iter().copied().sum();
        self.unary([1, 1], vec![s], Op::Sum { a: self.id })
    }

    /// Mean cross-entropy of row-wise `logits` against `targets`, skipping
    /// rows whose target is `ignore`.
    pub fn cross_entropy(self, targets: &[usize], ignore: usize) -> Result<Var<'t, T>> {
        let [rows, v] = self.shape();
        if targets.len() != rows {
            return Err(Error::ShapeMismatch { op: "cross_entropy", left: [rows, v], right: [targets.len(), 1] });
        }
        let mut probs = vec![T::zero(); rows * v];
        let mut total = T::zero();
        let mut count = 0usize;
        {
            let x = self.data();
            for (r, &t) in targets.iter().enumerate() {
                if t == ignore {
                    continue;
                }
                if t >= v {
                    return Err(Error::InvalidArgument {
                        op: "cross_entropy",
                        msg: format!("target {t} out of range for {v} classes"),
                    });
                }
                let row = &x[r * v..(r + 1) * v];
                let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                let sum: T = row.iter().map(|&z| (z - max).exp()).sum();
                let log_z = max + sum.ln();
                for c in 0..v {
                    probs[r * v + c] = (row[c] - log_z).exp();
                }
                total += log_z - row[t];
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyLoss);
        }
        let loss = total / T::from_usize(count).unwrap();
        let op = Op::CrossEntropy { logits: self.id, probs, targets: targets.to_vec(), ignore, count };
        Ok(self.unary([1, 1], vec![loss], op))
    }
}
