//! Reverse-mode automatic differentiation over dense tensors.
//!
//! Every operation appends a node holding its value and the inputs it was
//! computed from. Nodes are only ever appended, so the tape is always in
//! topological order and `backward` is a single reverse sweep.

use super::tensor::{gemm, Tensor};
use super::NumericsError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `[m, n] + [n]`, the vector broadcast over rows.
    AddRow(Var, Var),
    /// `[m, n] * [m]`, each row scaled by one entry.
    MulCol(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    MulConst(Var, Vec<f64>),
    Tanh(Var),
    Sigmoid(Var),
    HardSigmoid(Var),
    Square(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    SelectRows(Var, Var, Vec<bool>),
    /// Row-wise combination `sum_k w[r, k] * x_k[r, :]` with constant weights
    /// stored row-major as `[rows, K]`.
    WeightedSum(Vec<Var>, Vec<f64>),
    Sum(Var),
    Mean(Var),
    SumSquares(Var),
    Mse(Var, Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::MulCol(..) => "mul_col",
            Op::Scale(..) => "scale",
            Op::Shift(..) => "shift",
            Op::MulConst(..) => "mul_const",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::HardSigmoid(..) => "hard_sigmoid",
            Op::Square(..) => "square",
            Op::Softmax(..) => "softmax",
            Op::Concat(..) => "concat",
            Op::SliceCols(..) => "slice_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::SelectRows(..) => "select_rows",
            Op::WeightedSum(..) => "weighted_sum",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::SumSquares(..) => "sum_squares",
            Op::Mse(..) => "mse",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn hard_sigmoid(x: f64) -> f64 {
    (0.2 * x + 0.5).clamp(0.0, 1.0)
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// Softmax of a slice, with max-subtraction.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let mut out = xs.to_vec();
    softmax_in_place(&mut out);
    out
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> NumericsError {
    NumericsError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn with_cols(shape: &[usize], cols: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    match s.last_mut() {
        Some(last) => *last = cols,
        None => s.push(cols),
    }
    s
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A leaf tensor. Gradients are only tracked for leaves created with
    /// `requires_grad` and everything computed from them.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var, NumericsError> {
        if !value.all_finite() {
            return Err(NumericsError::NonFinite { op: op.name() });
        }
        let needs_grad = self.op_inputs(&op).iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn op_inputs(&self, op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::MulCol(a, b)
            | Op::SelectRows(a, b, _)
            | Op::Mse(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Shift(a)
            | Op::MulConst(a, _)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::HardSigmoid(a)
            | Op::Square(a)
            | Op::Softmax(a)
            | Op::SliceCols(a, _)
            | Op::GatherRows(a, _)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SumSquares(a) => vec![*a],
            Op::Concat(xs) | Op::WeightedSum(xs, _) => xs.clone(),
        }
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var, NumericsError> {
        let x = self.value(a);
        let data = x.data().iter().map(|&v| f(v)).collect();
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        self.push(out, op)
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var, NumericsError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch(op.name(), x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        self.push(out, op)
    }

    /// `[.., k] x [k, n] -> [.., n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (x, w) = (self.value(a), self.value(b));
        if w.shape().len() != 2 || x.cols() != w.shape()[0] {
            return Err(mismatch("matmul", x, w));
        }
        let (m, k, n) = (x.rows(), x.cols(), w.cols());
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, x.data(), false, w.data(), false, &mut out, 0.0);
        let shape = with_cols(x.shape(), n);
        self.push(Tensor::from_parts(shape, out), Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.zip(a, b, |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.zip(a, b, |p, q| p - q, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.zip(a, b, |p, q| p * q, Op::Mul(a, b))
    }

    /// Adds vector `b` (length = columns of `a`) to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (x, v) = (self.value(a), self.value(b));
        let n = x.cols();
        if v.len() != n {
            return Err(mismatch("add_row", x, v));
        }
        let mut data = x.data().to_vec();
        for row in data.chunks_mut(n) {
            for (o, &bias) in row.iter_mut().zip(v.data()) {
                *o += bias;
            }
        }
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        self.push(out, Op::AddRow(a, b))
    }

    /// Scales row `r` of `a` by `w[r]`.
    pub fn mul_col(&mut self, a: Var, w: Var) -> Result<Var, NumericsError> {
        let (x, s) = (self.value(a), self.value(w));
        let n = x.cols();
        if s.len() != x.rows() {
            return Err(mismatch("mul_col", x, s));
        }
        let mut data = x.data().to_vec();
        for (row, &k) in data.chunks_mut(n).zip(s.data()) {
            row.iter_mut().for_each(|o| *o *= k);
        }
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        self.push(out, Op::MulCol(a, w))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var, NumericsError> {
        self.map(a, |v| v * k, Op::Scale(a, k))
    }

    /// Adds a constant to every element.
    pub fn shift(&mut self, a: Var, k: f64) -> Result<Var, NumericsError> {
        self.map(a, |v| v + k, Op::Shift(a))
    }

    /// Elementwise product with a constant array (e.g. a dropout mask).
    pub fn mul_const(&mut self, a: Var, mask: Vec<f64>) -> Result<Var, NumericsError> {
        let x = self.value(a);
        if mask.len() != x.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "mul_const",
                left: x.shape().to_vec(),
                right: vec![mask.len()],
            });
        }
        let data = x.data().iter().zip(&mask).map(|(p, q)| p * q).collect();
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        self.push(out, Op::MulConst(a, mask))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NumericsError> {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NumericsError> {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    /// `clamp(0.2 x + 0.5, 0, 1)`.
    pub fn hard_sigmoid(&mut self, a: Var) -> Result<Var, NumericsError> {
        self.map(a, hard_sigmoid, Op::HardSigmoid(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var, NumericsError> {
        self.map(a, |v| v * v, Op::Square(a))
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var, NumericsError> {
        let x = self.value(a);
        let n = x.cols();
        let mut data = x.data().to_vec();
        data.chunks_mut(n).for_each(softmax_in_place);
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        self.push(out, Op::Softmax(a))
    }

    /// Concatenation along the last axis; all inputs need the same row count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let first = self.value(*parts.first().ok_or(NumericsError::EmptyInput("concat"))?);
        let rows = first.rows();
        let lead = first.shape()[..first.shape().len().saturating_sub(1)].to_vec();
        let mut total = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows || (t.shape().len() > 1 && t.shape()[..t.shape().len() - 1] != lead[..]) {
                return Err(mismatch("concat", first, t));
            }
            total += t.cols();
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let shape = with_cols(first.shape(), total);
        self.push(Tensor::from_parts(shape, data), Op::Concat(parts.to_vec()))
    }

    /// Columns `start..start + width` of every row.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var, NumericsError> {
        let x = self.value(a);
        let n = x.cols();
        if width == 0 || start + width > n {
            return Err(NumericsError::ShapeMismatch {
                op: "slice_cols",
                left: x.shape().to_vec(),
                right: vec![start, width],
            });
        }
        let mut data = Vec::with_capacity(x.rows() * width);
        for row in x.data().chunks(n) {
            data.extend_from_slice(&row[start..start + width]);
        }
        let shape = with_cols(x.shape(), width);
        self.push(Tensor::from_parts(shape, data), Op::SliceCols(a, start))
    }

    /// Rows of a matrix picked by index (repeats allowed): `[R, n] -> [len, n]`.
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var, NumericsError> {
        let x = self.value(a);
        let n = x.cols();
        if rows.is_empty() {
            return Err(NumericsError::EmptyInput("gather_rows"));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
            return Err(NumericsError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                len: x.rows(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            data.extend_from_slice(x.row(r));
        }
        let out = Tensor::from_parts(vec![rows.len(), n], data);
        self.push(out, Op::GatherRows(a, rows.to_vec()))
    }

    /// Row `r` of the result is row `r` of `a` where `take_a[r]`, else of `b`.
    pub fn select_rows(&mut self, take_a: &[bool], a: Var, b: Var) -> Result<Var, NumericsError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() || take_a.len() != x.rows() {
            return Err(mismatch("select_rows", x, y));
        }
        let mut data = Vec::with_capacity(x.len());
        for (r, &pick) in take_a.iter().enumerate() {
            data.extend_from_slice(if pick { x.row(r) } else { y.row(r) });
        }
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        self.push(out, Op::SelectRows(a, b, take_a.to_vec()))
    }

    /// `out[r, :] = sum_k weights[r * K + k] * xs[k][r, :]` with constant
    /// weights.
    pub fn weighted_sum(&mut self, xs: &[Var], weights: Vec<f64>) -> Result<Var, NumericsError> {
        let first = self.value(*xs.first().ok_or(NumericsError::EmptyInput("weighted_sum"))?);
        let (rows, n, k) = (first.rows(), first.cols(), xs.len());
        let shape = first.shape().to_vec();
        if weights.len() != rows * k {
            return Err(NumericsError::ShapeMismatch {
                op: "weighted_sum",
                left: shape,
                right: vec![weights.len()],
            });
        }
        let mut data = vec![0.0; rows * n];
        for (j, &x) in xs.iter().enumerate() {
            let t = self.value(x);
            if t.shape() != shape.as_slice() {
                return Err(NumericsError::ShapeMismatch {
                    op: "weighted_sum",
                    left: shape,
                    right: t.shape().to_vec(),
                });
            }
            for r in 0..rows {
                let w = weights[r * k + j];
                if w != 0.0 {
                    for (o, &v) in data[r * n..(r + 1) * n].iter_mut().zip(t.row(r)) {
                        *o += w * v;
                    }
                }
            }
        }
        self.push(Tensor::from_parts(shape, data), Op::WeightedSum(xs.to_vec(), weights))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NumericsError> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, NumericsError> {
        let x = self.value(a);
        let s = x.data().iter().sum::<f64>() / x.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var, NumericsError> {
        let s = self.value(a).data().iter().map(|v| v * v).sum();
        self.push(Tensor::scalar(s), Op::SumSquares(a))
    }

    /// Mean squared error between two same-shaped tensors.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, NumericsError> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() {
            return Err(mismatch("mse", p, t));
        }
        let s = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        self.push(Tensor::scalar(s), Op::Mse(pred, target))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericsError> {
        let root = &self.nodes[loss.0];
        if !root.value.is_scalar() {
            return Err(NumericsError::NonScalarLoss(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let y = node.value.data();
        // Adds into the gradient buffer of `v` if it participates.
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let len = self.nodes[v.0].value.len();
            let buf = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
            f(buf);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, w) = (self.value(*a), self.value(*b));
                let (m, k, n) = (x.rows(), x.cols(), w.cols());
                acc(*a, &mut |ga| gemm(m, n, k, g, false, w.data(), true, ga, 1.0));
                acc(*b, &mut |gb| gemm(k, m, n, x.data(), true, g, false, gb, 1.0));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(o, d)| *o += d));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(o, d)| *o += d));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(o, d)| *o += d));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(o, d)| *o -= d));
            }
            Op::Mul(a, b) => {
                let (x, z) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * z[i];
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..gb.len() {
                        gb[i] += g[i] * x[i];
                    }
                });
            }
            Op::AddRow(a, b) => {
                let n = self.value(*b).len();
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(o, d)| *o += d));
                acc(*b, &mut |gb| {
                    for row in g.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(o, d)| *o += d);
                    }
                });
            }
            Op::MulCol(a, w) => {
                let x = self.value(*a);
                let n = x.cols();
                let s = self.value(*w).data();
                acc(*a, &mut |ga| {
                    for (r, (grow, drow)) in ga.chunks_mut(n).zip(g.chunks(n)).enumerate() {
                        grow.iter_mut().zip(drow).for_each(|(o, d)| *o += d * s[r]);
                    }
                });
                acc(*w, &mut |gw| {
                    for (r, (xrow, drow)) in x.data().chunks(n).zip(g.chunks(n)).enumerate() {
                        gw[r] += xrow.iter().zip(drow).map(|(p, q)| p * q).sum::<f64>();
                    }
                });
            }
            Op::Scale(a, k) => acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(o, d)| *o += d * k)),
            Op::Shift(a) => acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(o, d)| *o += d)),
            Op::MulConst(a, mask) => acc(*a, &mut |ga| {
                for i in 0..ga.len() {
                    ga[i] += g[i] * mask[i];
                }
            }),
            Op::Tanh(a) => acc(*a, &mut |ga| {
                for i in 0..ga.len() {
                    ga[i] += g[i] * (1.0 - y[i] * y[i]);
                }
            }),
            Op::Sigmoid(a) => acc(*a, &mut |ga| {
                for i in 0..ga.len() {
                    ga[i] += g[i] * y[i] * (1.0 - y[i]);
                }
            }),
            Op::HardSigmoid(a) => {
                let x = self.value(*a).data();
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        if x[i] > -2.5 && x[i] < 2.5 {
                            ga[i] += 0.2 * g[i];
                        }
                    }
                })
            }
            Op::Square(a) => {
                let x = self.value(*a).data();
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += 2.0 * x[i] * g[i];
                    }
                })
            }
            Op::Softmax(a) => {
                let n = node.value.cols();
                acc(*a, &mut |ga| {
                    for ((grow, yrow), drow) in ga.chunks_mut(n).zip(y.chunks(n)).zip(g.chunks(n)) {
                        let dot: f64 = yrow.iter().zip(drow).map(|(p, q)| p * q).sum();
                        for j in 0..n {
                            grow[j] += yrow[j] * (drow[j] - dot);
                        }
                    }
                })
            }
            Op::Concat(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    acc(p, &mut |gp| {
                        for (grow, drow) in gp.chunks_mut(w).zip(g.chunks(total)) {
                            grow.iter_mut().zip(&drow[offset..offset + w]).for_each(|(o, d)| *o += d);
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceCols(a, start) => {
                let n = self.value(*a).cols();
                let w = node.value.cols();
                acc(*a, &mut |ga| {
                    for (grow, drow) in ga.chunks_mut(n).zip(g.chunks(w)) {
                        grow[*start..start + w].iter_mut().zip(drow).for_each(|(o, d)| *o += d);
                    }
                })
            }
            Op::GatherRows(a, rows) => {
                let n = node.value.cols();
                acc(*a, &mut |ga| {
                    for (drow, &r) in g.chunks(n).zip(rows) {
                        ga[r * n..(r + 1) * n].iter_mut().zip(drow).for_each(|(o, d)| *o += d);
                    }
                })
            }
            Op::SelectRows(a, b, take_a) => {
                let n = node.value.cols();
                acc(*a, &mut |ga| {
                    for (r, drow) in g.chunks(n).enumerate().filter(|(r, _)| take_a[*r]) {
                        ga[r * n..(r + 1) * n].iter_mut().zip(drow).for_each(|(o, d)| *o += d);
                    }
                });
                acc(*b, &mut |gb| {
                    for (r, drow) in g.chunks(n).enumerate().filter(|(r, _)| !take_a[*r]) {
                        gb[r * n..(r + 1) * n].iter_mut().zip(drow).for_each(|(o, d)| *o += d);
                    }
                });
            }
            Op::WeightedSum(xs, weights) => {
                let n = node.value.cols();
                let k = xs.len();
                for (j, &x) in xs.iter().enumerate() {
                    acc(x, &mut |gx| {
                        for (r, (grow, drow)) in gx.chunks_mut(n).zip(g.chunks(n)).enumerate() {
                            let w = weights[r * k + j];
                            if w != 0.0 {
                                grow.iter_mut().zip(drow).for_each(|(o, d)| *o += w * d);
                            }
                        }
                    });
                }
            }
            Op::Sum(a) => acc(*a, &mut |ga| ga.iter_mut().for_each(|o| *o += g[0])),
            Op::Mean(a) => acc(*a, &mut |ga| {
                let k = g[0] / ga.len() as f64;
                ga.iter_mut().for_each(|o| *o += k);
            }),
            Op::SumSquares(a) => {
                let x = self.value(*a).data();
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += 2.0 * x[i] * g[0];
                    }
                })
            }
            Op::Mse(p, t) => {
                let (pv, tv) = (self.value(*p).data(), self.value(*t).data());
                let k = 2.0 * g[0] / pv.len() as f64;
                acc(*p, &mut |gp| {
                    for i in 0..gp.len() {
                        gp[i] += k * (pv[i] - tv[i]);
                    }
                });
                acc(*t, &mut |gt| {
                    for i in 0..gt.len() {
                        gt[i] -= k * (pv[i] - tv[i]);
                    }
                });
            }
        }
    }
}

/// Result of a backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` when `v` does not
    /// influence the loss.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Like [`get`](Self::get), with zeros for unreached nodes.
    pub fn get_or_zeros(&self, v: Var, len: usize) -> Vec<f64> {
        self.get(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; len])
    }
}
