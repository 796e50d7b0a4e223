//! Recorded computation with reverse-mode differentiation.
//!
//! Every primitive applied through a [`Tape`] evaluates eagerly and appends
//! one node holding the op, its input handles and the produced value. Inputs
//! always precede their consumers, so the node list is a topological order
//! and [`Tape::backward`] is a single reverse sweep.
//!
//! All values are rank-2 matrices. Rank-1 parameters enter as `1 × n` rows
//! and their gradients are reshaped back on the way out.

use std::cell::{Ref, RefCell};
use std::collections::HashMap;

use super::{ParamId, ParamStore, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub enum Op {
    /// Leaf that never receives a gradient.
    Constant,
    /// Leaf that receives a gradient but is not a registered parameter.
    Variable,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceCols { input: Var, start: usize, len: usize },
    Add(Var, Var),
    /// Adds a `1 × n` row to every row of an `m × n` matrix.
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Ln(Var),
    LogSigmoid(Var),
    Cos(Var),
    SoftmaxRows(Var),
    Sum(Var),
    Mean(Var),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Variable => "variable",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::ConcatRows(_) => "concat_rows",
            Op::ConcatCols(_) => "concat_cols",
            Op::SliceCols { .. } => "slice_cols",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Ln(_) => "ln",
            Op::LogSigmoid(_) => "log_sigmoid",
            Op::Cos(_) => "cos",
            Op::SoftmaxRows(_) => "softmax_rows",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Constant | Op::Variable | Op::Param(_) => Vec::new(),
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::ConcatRows(v) | Op::ConcatCols(v) => v.clone(),
            Op::SliceCols { input, .. } => vec![*input],
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Ln(a)
            | Op::LogSigmoid(a)
            | Op::Cos(a)
            | Op::SoftmaxRows(a)
            | Op::Sum(a)
            | Op::Mean(a) => vec![*a],
        }
    }

    fn is_leaf(&self) -> bool {
        matches!(self, Op::Constant | Op::Variable | Op::Param(_))
    }
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// The active computation record.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<HashMap<ParamId, Var>>,
}

/// Gradient of a scalar with respect to every parameter of a store.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().enumerate().map(|(i, g)| (ParamId(i), g))
    }

    /// Zero gradients shaped like `store`.
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect(),
        }
    }

    /// Adds `other` into `self` entry by entry, in parameter order.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            for (a, b) in mine.data_mut().iter_mut().zip(theirs.data()) {
                *a += b;
            }
        }
    }
}

fn shape_err(op: &'static str, left: &Tensor, right: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: left.shape().to_vec(),
        right: right.shape().to_vec(),
    }
}

fn mat(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
    Tensor::matrix(rows, cols, data).expect("internal shape bookkeeping")
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    mat(t.rows(), t.cols(), t.data().iter().map(|&v| f(v)).collect())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn matmul_values(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            let brow = &bd[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    mat(m, n, out)
}

fn transpose_values(a: &Tensor) -> Tensor {
    let (m, n) = (a.rows(), a.cols());
    let d = a.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = d[i * n + j];
        }
    }
    mat(n, m, out)
}

/// Evaluates one primitive given its input values.
fn compute<'a>(op: &Op, value_of: &dyn Fn(Var) -> &'a Tensor) -> Result<Tensor, TensorError> {
    Ok(match op {
        Op::Constant | Op::Variable | Op::Param(_) => unreachable!("leaves are not recomputed"),
        Op::MatMul(a, b) => {
            let (a, b) = (value_of(*a), value_of(*b));
            if a.cols() != b.rows() {
                return Err(shape_err("matmul", a, b));
            }
            matmul_values(a, b)
        }
        Op::Transpose(a) => transpose_values(value_of(*a)),
        Op::ConcatRows(parts) => {
            let values: Vec<&Tensor> = parts.iter().map(|&p| value_of(p)).collect();
            concat_rows_values(&values)?
        }
        Op::ConcatCols(parts) => {
            let values: Vec<&Tensor> = parts.iter().map(|&p| value_of(p)).collect();
            concat_cols_values(&values)?
        }
        Op::SliceCols { input, start, len } => slice_cols_values(value_of(*input), *start, *len)?,
        Op::Add(a, b) => {
            let (a, b) = (value_of(*a), value_of(*b));
            if a.rows() != b.rows() || a.cols() != b.cols() {
                return Err(shape_err("add", a, b));
            }
            mat(a.rows(), a.cols(), a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect())
        }
        Op::AddRow(a, b) => {
            let (a, b) = (value_of(*a), value_of(*b));
            if b.rows() != 1 || a.cols() != b.cols() {
                return Err(shape_err("add_row", a, b));
            }
            let n = a.cols();
            let bd = b.data();
            mat(
                a.rows(),
                n,
                a.data().iter().enumerate().map(|(i, x)| x + bd[i % n]).collect(),
            )
        }
        Op::Mul(a, b) => {
            let (a, b) = (value_of(*a), value_of(*b));
            if a.rows() != b.rows() || a.cols() != b.cols() {
                return Err(shape_err("mul", a, b));
            }
            mat(a.rows(), a.cols(), a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect())
        }
        Op::Scale(a, c) => map(value_of(*a), |v| v * c),
        Op::Relu(a) => map(value_of(*a), |v| if v > 0.0 { v } else { 0.0 }),
        Op::Sigmoid(a) => map(value_of(*a), sigmoid),
        Op::Ln(a) => {
            let a = value_of(*a);
            if let Some(&bad) = a.data().iter().find(|&&v| !(v > 0.0)) {
                return Err(TensorError::Domain { op: "ln", value: bad });
            }
            map(a, f64::ln)
        }
        Op::LogSigmoid(a) => map(value_of(*a), log_sigmoid),
        Op::Cos(a) => map(value_of(*a), f64::cos),
        Op::SoftmaxRows(a) => {
            let a = value_of(*a);
            let n = a.cols();
            let mut out = a.data().to_vec();
            for row in out.chunks_mut(n) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            mat(a.rows(), n, out)
        }
        Op::Sum(a) => {
            let a = value_of(*a);
            Tensor::scalar(a.data().iter().fold(0.0, |acc, v| acc + v))
        }
        Op::Mean(a) => {
            let a = value_of(*a);
            Tensor::scalar(a.data().iter().fold(0.0, |acc, v| acc + v) / a.len() as f64)
        }
    })
}

fn concat_rows_values(values: &[&Tensor]) -> Result<Tensor, TensorError> {
    let first = values.first().ok_or(TensorError::EmptyConcat("concat_rows"))?;
    let cols = first.cols();
    let mut out = Vec::with_capacity(values.iter().map(|v| v.len()).sum());
    let mut rows = 0;
    for v in values {
        if v.cols() != cols {
            return Err(shape_err("concat_rows", first, v));
        }
        out.extend_from_slice(v.data());
        rows += v.rows();
    }
    Ok(mat(rows, cols, out))
}

fn concat_cols_values(values: &[&Tensor]) -> Result<Tensor, TensorError> {
    let first = values.first().ok_or(TensorError::EmptyConcat("concat_cols"))?;
    let rows = first.rows();
    for v in values {
        if v.rows() != rows {
            return Err(shape_err("concat_cols", first, v));
        }
    }
    let cols: usize = values.iter().map(|v| v.cols()).sum();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for v in values {
            let c = v.cols();
            out.extend_from_slice(&v.data()[r * c..(r + 1) * c]);
        }
    }
    Ok(mat(rows, cols, out))
}

fn slice_cols_values(a: &Tensor, start: usize, len: usize) -> Result<Tensor, TensorError> {
    if len == 0 || start + len > a.cols() {
        return Err(TensorError::InvalidShape {
            shape: a.shape().to_vec(),
            reason: "column slice out of range",
        });
    }
    let c = a.cols();
    let mut out = Vec::with_capacity(a.rows() * len);
    for r in 0..a.rows() {
        out.extend_from_slice(&a.data()[r * c + start..r * c + start + len]);
    }
    Ok(mat(a.rows(), len, out))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Borrowed view of a recorded value.
    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    pub fn op(&self, v: Var) -> Op {
        self.nodes.borrow()[v.0].op.clone()
    }

    fn push_leaf(&self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op,
            value: value.as_matrix(),
            needs_grad,
        });
        Var(nodes.len() - 1)
    }

    pub fn constant(&self, value: Tensor) -> Var {
        self.push_leaf(Op::Constant, value, false)
    }

    /// A leaf whose gradient can be queried with [`Tape::gradient_wrt`].
    pub fn variable(&self, value: Tensor) -> Var {
        self.push_leaf(Op::Variable, value, true)
    }

    /// Leaf for a stored parameter; repeated calls return the same handle.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.borrow().get(&id) {
            return v;
        }
        let v = self.push_leaf(Op::Param(id), store.get(id).clone(), true);
        self.params.borrow_mut().insert(id, v);
        v
    }

    fn apply(&self, op: Op) -> Result<Var, TensorError> {
        let (value, needs_grad) = {
            let nodes = self.nodes.borrow();
            let needs_grad = op.inputs().iter().any(|i| nodes[i.0].needs_grad);
            let value = compute(&op, &|v| &nodes[v.0].value)?;
            (value, needs_grad)
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value, needs_grad });
        Ok(Var(nodes.len() - 1))
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.apply(Op::MatMul(a, b))
    }

    pub fn transpose(&self, a: Var) -> Result<Var, TensorError> {
        self.apply(Op::Transpose(a))
    }

    pub fn concat_rows(&self, parts: &[Var]) -> Result<Var, TensorError> {
        self.apply(Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Result<Var, TensorError> {
        self.apply(Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        self.apply(Op::SliceCols { input: a, start, len })
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.apply(Op::Add(a, b))
    }

    pub fn add_row(&self, a: Var, row: Var) -> Result<Var, TensorError> {
        self.apply(Op::AddRow(a, row))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.apply(Op::Mul(a, b))
    }

    pub fn scale(&self, a: Var, factor: f64) -> Result<Var, TensorError> {
        self.apply(Op::Scale(a, factor))
    }

    pub fn relu(&self, a: Var) -> Result<Var, TensorError> {
        self.apply(Op::Relu(a))
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var, TensorError> {
        self.apply(Op::Sigmoid(a))
    }

    pub fn ln(&self, a: Var) -> Result<Var, TensorError> {
        self.apply(Op::Ln(a))
    }

    /// `ln σ(x)` evaluated without forming `σ(x)`.
    pub fn log_sigmoid(&self, a: Var) -> Result<Var, TensorError> {
        self.apply(Op::LogSigmoid(a))
    }

    pub fn cos(&self, a: Var) -> Result<Var, TensorError> {
        self.apply(Op::Cos(a))
    }

    pub fn softmax_rows(&self, a: Var) -> Result<Var, TensorError> {
        self.apply(Op::SoftmaxRows(a))
    }

    pub fn sum(&self, a: Var) -> Result<Var, TensorError> {
        self.apply(Op::Sum(a))
    }

    pub fn mean(&self, a: Var) -> Result<Var, TensorError> {
        self.apply(Op::Mean(a))
    }

    /// Recomputes every non-leaf value from the recorded ops, starting from
    /// the stored leaf values.
    pub fn replay(&self) -> Result<Vec<Tensor>, TensorError> {
        let nodes = self.nodes.borrow();
        let mut values: Vec<Tensor> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let v = if node.op.is_leaf() {
                node.value.clone()
            } else {
                compute(&node.op, &|v| &values[v.0])?
            };
            values.push(v);
        }
        Ok(values)
    }

    /// True when [`Tape::replay`] reproduces every recorded value bit for bit.
    pub fn replay_matches(&self) -> Result<bool, TensorError> {
        let replayed = self.replay()?;
        let nodes = self.nodes.borrow();
        Ok(nodes.iter().zip(&replayed).all(|(n, r)| {
            n.value.shape() == r.shape()
                && n.value
                    .data()
                    .iter()
                    .zip(r.data())
                    .all(|(a, b)| a.to_bits() == b.to_bits())
        }))
    }

    fn adjoints(&self, loss: Var) -> Result<Vec<Option<Vec<f64>>>, TensorError> {
        let nodes = self.nodes.borrow();
        let loss_value = &nodes[loss.0].value;
        if loss_value.len() != 1 {
            return Err(TensorError::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            if node.op.is_leaf() {
                adj[id] = Some(g);
                continue;
            }
            backprop_node(&nodes, node, &g, &mut adj);
        }
        Ok(adj)
    }

    /// Gradient of the scalar `loss` with respect to every parameter of
    /// `store`. Parameters that do not reach `loss` get zeros.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients, TensorError> {
        let adj = self.adjoints(loss)?;
        let params = self.params.borrow();
        let grads = store
            .iter()
            .map(|(id, _, t)| match params.get(&id).and_then(|v| adj.get(v.0)).and_then(Option::as_ref) {
                Some(g) => Tensor::new(t.shape().to_vec(), g.clone()).expect("param gradient shape"),
                None => Tensor::zeros(t.shape()),
            })
            .collect();
        Ok(Gradients { grads })
    }

    /// Gradient of `loss` with respect to arbitrary leaves created by
    /// [`Tape::variable`] or [`Tape::param`].
    pub fn gradient_wrt(&self, loss: Var, leaves: &[Var]) -> Result<Vec<Tensor>, TensorError> {
        let adj = self.adjoints(loss)?;
        let nodes = self.nodes.borrow();
        Ok(leaves
            .iter()
            .map(|v| {
                let shape = nodes[v.0].value.shape().to_vec();
                match adj.get(v.0).and_then(Option::as_ref) {
                    Some(g) => Tensor::new(shape, g.clone()).expect("leaf gradient shape"),
                    None => Tensor::zeros(&shape),
                }
            })
            .collect())
    }
}

/// Accumulator for node `id`, zero-initialized on first use.
fn slot(adj: &mut [Option<Vec<f64>>], id: usize, len: usize) -> &mut Vec<f64> {
    adj[id].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(slot: &mut Option<Vec<f64>>, contribution: Vec<f64>) {
    match slot {
        Some(acc) => {
            for (a, c) in acc.iter_mut().zip(&contribution) {
                *a += c;
            }
        }
        None => *slot = Some(contribution),
    }
}

fn backprop_node(nodes: &[Node], node: &Node, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
    let wants = |v: &Var| nodes[v.0].needs_grad;
    let out = &node.value;
    match &node.op {
        Op::Constant | Op::Variable | Op::Param(_) => {}
        Op::MatMul(a, b) => {
            let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
            let (m, k, n) = (av.rows(), av.cols(), bv.cols());
            if wants(a) {
                // dA = G · Bᵀ
                let bd = bv.data();
                let da = slot(adj, a.0, m * k);
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let brow = &bd[p * n..(p + 1) * n];
                        da[i * k + p] += grow.iter().zip(brow).fold(0.0, |acc, (x, y)| acc + x * y);
                    }
                }
            }
            if wants(b) {
                // dB = Aᵀ · G
                let ad = av.data();
                let db = slot(adj, b.0, k * n);
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let aval = ad[i * k + p];
                        let drow = &mut db[p * n..(p + 1) * n];
                        for (d, x) in drow.iter_mut().zip(grow) {
                            *d += aval * x;
                        }
                    }
                }
            }
        }
        Op::Transpose(a) => {
            if wants(a) {
                let gt = transpose_values(&mat(out.rows(), out.cols(), g.to_vec()));
                add_into(&mut adj[a.0], gt.into_data());
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for p in parts {
                let len = nodes[p.0].value.len();
                if wants(p) {
                    add_into(&mut adj[p.0], g[offset..offset + len].to_vec());
                }
                offset += len;
            }
        }
        Op::ConcatCols(parts) => {
            let total = out.cols();
            let mut col = 0;
            for p in parts {
                let c = nodes[p.0].value.cols();
                if wants(p) {
                    let mut part = Vec::with_capacity(out.rows() * c);
                    for r in 0..out.rows() {
                        part.extend_from_slice(&g[r * total + col..r * total + col + c]);
                    }
                    add_into(&mut adj[p.0], part);
                }
                col += c;
            }
        }
        Op::SliceCols { input, start, len } => {
            if wants(input) {
                let src = &nodes[input.0].value;
                let c = src.cols();
                let mut part = vec![0.0; src.len()];
                for r in 0..src.rows() {
                    part[r * c + start..r * c + start + len].copy_from_slice(&g[r * len..(r + 1) * len]);
                }
                add_into(&mut adj[input.0], part);
            }
        }
        Op::Add(a, b) => {
            if wants(a) {
                add_into(&mut adj[a.0], g.to_vec());
            }
            if wants(b) {
                add_into(&mut adj[b.0], g.to_vec());
            }
        }
        Op::AddRow(a, b) => {
            if wants(a) {
                add_into(&mut adj[a.0], g.to_vec());
            }
            if wants(b) {
                let n = out.cols();
                let mut db = vec![0.0; n];
                for row in g.chunks(n) {
                    for (d, x) in db.iter_mut().zip(row) {
                        *d += x;
                    }
                }
                add_into(&mut adj[b.0], db);
            }
        }
        Op::Mul(a, b) => {
            let (av, bv) = (nodes[a.0].value.data(), nodes[b.0].value.data());
            if wants(a) {
                add_into(&mut adj[a.0], g.iter().zip(bv).map(|(x, y)| x * y).collect());
            }
            if wants(b) {
                add_into(&mut adj[b.0], g.iter().zip(av).map(|(x, y)| x * y).collect());
            }
        }
        Op::Scale(a, c) => {
            if wants(a) {
                add_into(&mut adj[a.0], g.iter().map(|x| x * c).collect());
            }
        }
        Op::Relu(a) => {
            if wants(a) {
                let x = nodes[a.0].value.data();
                add_into(
                    &mut adj[a.0],
                    g.iter().zip(x).map(|(d, &v)| if v > 0.0 { *d } else { 0.0 }).collect(),
                );
            }
        }
        Op::Sigmoid(a) => {
            if wants(a) {
                add_into(
                    &mut adj[a.0],
                    g.iter().zip(out.data()).map(|(d, y)| d * y * (1.0 - y)).collect(),
                );
            }
        }
        Op::Ln(a) => {
            if wants(a) {
                let x = nodes[a.0].value.data();
                add_into(&mut adj[a.0], g.iter().zip(x).map(|(d, v)| d / v).collect());
            }
        }
        Op::LogSigmoid(a) => {
            if wants(a) {
                let x = nodes[a.0].value.data();
                add_into(&mut adj[a.0], g.iter().zip(x).map(|(d, &v)| d * sigmoid(-v)).collect());
            }
        }
        Op::Cos(a) => {
            if wants(a) {
                let x = nodes[a.0].value.data();
                add_into(&mut adj[a.0], g.iter().zip(x).map(|(d, v)| -d * v.sin()).collect());
            }
        }
        Op::SoftmaxRows(a) => {
            if wants(a) {
                let n = out.cols();
                let mut dx = vec![0.0; out.len()];
                for ((drow, grow), yrow) in dx.chunks_mut(n).zip(g.chunks(n)).zip(out.data().chunks(n)) {
                    let dot = grow.iter().zip(yrow).fold(0.0, |acc, (x, y)| acc + x * y);
                    for ((d, gv), y) in drow.iter_mut().zip(grow).zip(yrow) {
                        *d = y * (gv - dot);
                    }
                }
                add_into(&mut adj[a.0], dx);
            }
        }
        Op::Sum(a) => {
            if wants(a) {
                add_into(&mut adj[a.0], vec![g[0]; nodes[a.0].value.len()]);
            }
        }
        Op::Mean(a) => {
            if wants(a) {
                let n = nodes[a.0].value.len();
                add_into(&mut adj[a.0], vec![g[0] / n as f64; n]);
            }
        }
    }
}
