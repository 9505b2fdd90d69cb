//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation in creation order, so node indices are
//! already a topological order of the graph. [`Tape::backward`] walks them in
//! reverse, applying each node's backward rule and adding the resulting
//! gradients into the stored ones. Gradients accumulate across calls until
//! [`Tape::zero_grad`].
//!
//! ```
//! use direc::tensor::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Matrix::from_rows(&[vec![3.0]]));
//! let y = tape.l2_norm_sq(x);
//! tape.backward(y).unwrap();
//! assert_eq!(tape.grad(x).unwrap().get(0, 0), 6.0);
//! ```

use std::sync::Arc;

use super::{Matrix, SparseMatrix};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Spmm(Arc<SparseMatrix>, Var),
    MatMul(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    ConcatCols(Var, Var),
    SliceCols { input: Var, start: usize },
    ConcatRows(Var, Var),
    SliceRows { input: Var, start: usize },
    GatherRows { input: Var, index: Arc<[usize]> },
    Transpose(Var),
    RowwiseInner(Var, Var),
    Relu(Var),
    LogSigmoid(Var),
    LogSumExpRows(Var),
    L2NormSq(Var),
    Sum(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Spmm(..) => "spmm",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Scale(..) => "scale",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols { .. } => "slice_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::SliceRows { .. } => "slice_rows",
            Op::GatherRows { .. } => "gather_rows",
            Op::Transpose(..) => "transpose",
            Op::RowwiseInner(..) => "rowwise_inner",
            Op::Relu(..) => "relu",
            Op::LogSigmoid(..) => "log_sigmoid",
            Op::LogSumExpRows(..) => "logsumexp_rows",
            Op::L2NormSq(..) => "l2_norm_sq",
            Op::Sum(..) => "sum",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    grad: Option<Matrix>,
    op: Op,
}

/// Differentiation graph. Confined to one thread.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    non_finite: Option<(usize, &'static str)>,
}

fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logsumexp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let id = self.nodes.len();
        if self.non_finite.is_none() && !value.is_finite() {
            self.non_finite = Some((id, op.name()));
        }
        self.nodes.push(Node { value, grad: None, op });
        Var(id)
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "scalar() on a non-scalar node");
        m.get(0, 0)
    }

    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Matrix> {
        self.nodes[v.0].grad.take()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Name of the first operation that produced a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.non_finite.map(|(_, name)| name)
    }

    pub fn spmm(&mut self, s: &Arc<SparseMatrix>, v: Var) -> Var {
        let out = s.matmul_dense(self.value(v));
        self.push(out, Op::Spmm(Arc::clone(s), v))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "add shape mismatch");
        let mut out = x.clone();
        out.add_assign(y);
        self.push(out, Op::Add(a, b))
    }

    /// `a - b`, recorded as `add(a, scale(b, -1))`.
    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let nb = self.scale(b, -1.0);
        self.add(a, nb)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).scaled(factor);
        self.push(out, Op::Scale(a, factor))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.rows(), y.rows(), "concat_cols row mismatch");
        let (ca, cb) = (x.cols(), y.cols());
        let mut out = Matrix::zeros(x.rows(), ca + cb);
        for r in 0..x.rows() {
            let row = out.row_mut(r);
            row[..ca].copy_from_slice(x.row(r));
            row[ca..].copy_from_slice(y.row(r));
        }
        self.push(out, Op::ConcatCols(a, b))
    }

    /// Columns `start..start + len` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        assert!(start + len <= x.cols(), "slice_cols {start}..{} out of {} columns", start + len, x.cols());
        let out = Matrix::from_fn(x.rows(), len, |r, c| x.get(r, start + c));
        self.push(out, Op::SliceCols { input: a, start })
    }

    /// Stacks `a` on top of `b`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.cols(), y.cols(), "concat_rows column mismatch");
        let mut data = Vec::with_capacity((x.rows() + y.rows()) * x.cols());
        data.extend_from_slice(x.as_slice());
        data.extend_from_slice(y.as_slice());
        let out = Matrix::from_vec(x.rows() + y.rows(), x.cols(), data);
        self.push(out, Op::ConcatRows(a, b))
    }

    /// Rows `start..start + len` of `a`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let x = self.value(a);
        assert!(start + len <= x.rows(), "slice_rows {start}..{} out of {} rows", start + len, x.rows());
        let c = x.cols();
        let out = Matrix::from_vec(len, c, x.as_slice()[start * c..(start + len) * c].to_vec());
        self.push(out, Op::SliceRows { input: a, start })
    }

    /// Row `index[k]` of `a` becomes row `k` of the output. Indices may repeat.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Var {
        let x = self.value(a);
        let c = x.cols();
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index {
            assert!(i < x.rows(), "gather_rows index {i} out of {} rows", x.rows());
            data.extend_from_slice(x.row(i));
        }
        let out = Matrix::from_vec(index.len(), c, data);
        self.push(out, Op::GatherRows { input: a, index: index.into() })
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    /// Per-row inner products of two equally shaped matrices, as a column.
    pub fn rowwise_inner(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "rowwise_inner shape mismatch");
        let out = Matrix::from_fn(x.rows(), 1, |r, _| super::dot(x.row(r), y.row(r)));
        self.push(out, Op::RowwiseInner(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(out, Op::Relu(a))
    }

    /// Elementwise `log σ(x)`, evaluated without overflow.
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(log_sigmoid);
        self.push(out, Op::LogSigmoid(a))
    }

    /// `log Σ_j exp(a_ij)` per row, with max subtraction.
    pub fn logsumexp_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Matrix::from_fn(x.rows(), 1, |r, _| logsumexp(x.row(r)));
        self.push(out, Op::LogSumExpRows(a))
    }

    /// Sum of squared entries, as a 1×1 node.
    pub fn l2_norm_sq(&mut self, a: Var) -> Var {
        let out = Matrix::filled(1, 1, self.value(a).sum_sq());
        self.push(out, Op::L2NormSq(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::filled(1, 1, self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// Propagates d(root)/d(node) to every node reachable from `root` and
    /// adds it into the stored gradients.
    ///
    /// Returns [`Error::NonFinite`] if any recorded forward value was not
    /// finite; no gradients are written in that case.
    ///
    /// # Panics
    ///
    /// Panics if `root` is not 1×1.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        assert_eq!(self.shape(root), (1, 1), "backward() requires a scalar root");
        if let Some((_, name)) = self.non_finite {
            return Err(Error::NonFinite(format!("forward value of `{name}`")));
        }

        let mut grads: Vec<Option<Matrix>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Matrix::filled(1, 1, 1.0));

        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.backward_node(id, &g, &mut grads);
            let node = &mut self.nodes[id];
            match &mut node.grad {
                Some(acc) => acc.add_assign(&g),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn backward_node(&self, id: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[id];
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Spmm(s, a) => accumulate(grads, *a, s.transpose_matmul_dense(g)),
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.matmul_nt(val(*b)));
                accumulate(grads, *b, val(*a).matmul_tn(g));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Scale(a, f) => accumulate(grads, *a, g.scaled(*f)),
            Op::ConcatCols(a, b) => {
                let ca = val(*a).cols();
                let cb = val(*b).cols();
                accumulate(grads, *a, Matrix::from_fn(g.rows(), ca, |r, c| g.get(r, c)));
                accumulate(grads, *b, Matrix::from_fn(g.rows(), cb, |r, c| g.get(r, ca + c)));
            }
            Op::SliceCols { input, start } => {
                let (rows, cols) = val(*input).shape();
                let mut out = Matrix::zeros(rows, cols);
                for r in 0..rows {
                    out.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                accumulate(grads, *input, out);
            }
            Op::ConcatRows(a, b) => {
                let (ra, c) = val(*a).shape();
                let rb = val(*b).rows();
                let s = g.as_slice();
                accumulate(grads, *a, Matrix::from_vec(ra, c, s[..ra * c].to_vec()));
                accumulate(grads, *b, Matrix::from_vec(rb, c, s[ra * c..].to_vec()));
            }
            Op::SliceRows { input, start } => {
                let (rows, cols) = val(*input).shape();
                let mut out = Matrix::zeros(rows, cols);
                out.as_mut_slice()[start * cols..(start + g.rows()) * cols].copy_from_slice(g.as_slice());
                accumulate(grads, *input, out);
            }
            Op::GatherRows { input, index } => {
                let (rows, cols) = val(*input).shape();
                let mut out = Matrix::zeros(rows, cols);
                for (k, &i) in index.iter().enumerate() {
                    for (o, &x) in out.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += x;
                    }
                }
                accumulate(grads, *input, out);
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::RowwiseInner(a, b) => {
                let (x, y) = (val(*a), val(*b));
                accumulate(grads, *a, Matrix::from_fn(x.rows(), x.cols(), |r, c| g.get(r, 0) * y.get(r, c)));
                accumulate(grads, *b, Matrix::from_fn(x.rows(), x.cols(), |r, c| g.get(r, 0) * x.get(r, c)));
            }
            Op::Relu(a) => {
                let x = val(*a);
                let out = Matrix::from_fn(x.rows(), x.cols(), |r, c| if x.get(r, c) > 0.0 { g.get(r, c) } else { 0.0 });
                accumulate(grads, *a, out);
            }
            Op::LogSigmoid(a) => {
                let x = val(*a);
                let out = Matrix::from_fn(x.rows(), x.cols(), |r, c| g.get(r, c) * sigmoid(-x.get(r, c)));
                accumulate(grads, *a, out);
            }
            Op::LogSumExpRows(a) => {
                let x = val(*a);
                let lse = &node.value;
                let out = Matrix::from_fn(x.rows(), x.cols(), |r, c| g.get(r, 0) * (x.get(r, c) - lse.get(r, 0)).exp());
                accumulate(grads, *a, out);
            }
            Op::L2NormSq(a) => accumulate(grads, *a, val(*a).scaled(2.0 * g.get(0, 0))),
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                accumulate(grads, *a, Matrix::filled(r, c, g.get(0, 0)));
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
