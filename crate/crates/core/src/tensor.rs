//! Dense `f64` tensors and a define-by-run reverse-mode tape.
//!
//! A [`Tape`] records every operation applied to the [`Var`] handles it hands
//! out. Calling [`Tape::backward`] on a scalar output walks the recorded nodes
//! in exact reverse order and accumulates analytic partials into every node
//! that requires a gradient.
//!
//! Broadcasting is deliberately narrow: binary ops accept equal shapes or a
//! single-element operand on either side. Anything else must be reshaped.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { len: usize, shape: Vec<usize> },
    #[error("log of non-positive value {value} at index {index}")]
    LogDomain { index: usize, value: f64 },
    #[error("label {label} at row {row} is outside [0, {classes})")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        classes: usize,
    },
    #[error("backward requires a single-element output, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Row-major dense array of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(TensorError::InvalidArgument(format!(
                "dimensions must be positive, got {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(TensorError::DataLength {
                len: data.len(),
                shape,
            });
        }
        Ok(Self { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::InvalidArgument("ragged rows".into()));
        }
        Self::matrix(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Trailing dimension product; equals the column count for matrices.
    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape.to_vec(), self.data.clone())
    }

    /// Gathers whole rows (first axis) in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        let mut shape = self.shape.clone();
        shape[0] = idx.len();
        Tensor { shape, data }
    }

    /// Index of the largest entry in each row; ties go to the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows())
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Plain matrix product without recording anything.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = matrix_dims(self, "matmul")?;
        let (k2, n) = matrix_dims(other, "matmul")?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm_nn(m, k, n, &self.data, &other.data, &mut out);
        Tensor::matrix(m, n, out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

fn matrix_dims(t: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    if t.shape.len() != 2 {
        return Err(TensorError::ShapeMismatch {
            op,
            lhs: t.shape.clone(),
            rhs: vec![],
        });
    }
    Ok((t.shape[0], t.shape[1]))
}

// C[m×n] += A[m×k] · B[k×n]
fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += aip * bv;
            }
        }
    }
}

// C[m×k] += G[m×n] · B[k×n]ᵀ
fn gemm_nt(m: usize, n: usize, k: usize, g: &[f64], b: &[f64], c: &mut [f64]) {
    let mut bt = vec![0.0; n * k];
    for r in 0..k {
        for j in 0..n {
            bt[j * k + r] = b[r * n + j];
        }
    }
    gemm_nn(m, n, k, g, &bt, c);
}

// C[k×n] += A[m×k]ᵀ · G[m×n]
fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], g: &[f64], c: &mut [f64]) {
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cv, &gv) in c_row.iter_mut().zip(g_row) {
                *cv += aip * gv;
            }
        }
    }
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise operation kinds accepted by [`Tape::elementwise`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Neg,
    Exp,
    Log,
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu(f64),
    Scale(f64),
}

impl ElementwiseOp {
    fn arity(self) -> usize {
        match self {
            ElementwiseOp::Add | ElementwiseOp::Sub | ElementwiseOp::Mul => 2,
            _ => 1,
        }
    }
}

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug)]
enum Op {
    Leaf,
    /// Elementwise unary map; `local` holds d(out)/d(in) per element.
    Unary { x: usize, local: Vec<f64> },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    MatMul { a: usize, b: usize },
    Sum { x: usize },
    Mean { x: usize },
    Reshape { x: usize },
    /// out[i] = x[i, idx[i]]
    Gather { x: usize, idx: Vec<usize> },
    GradReversal { x: usize, lambda: f64 },
    SoftmaxXent {
        logits: usize,
        probs: Vec<f64>,
        labels: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Ordered record of operations for one forward/backward pass.
///
/// A tape is single-threaded; independent tapes share nothing.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    /// Drops every recorded node. Outstanding [`Var`]s become invalid.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient buffer of `v` after [`Tape::backward`], if it was reached.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        node.grad.as_ref().map(|g| Tensor {
            shape: node.value.shape.clone(),
            data: g.clone(),
        })
    }

    pub fn grad_slice(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Dispatches on `op`. Binary kinds take two inputs, the rest one.
    pub fn elementwise(&mut self, op: ElementwiseOp, inputs: &[Var]) -> Result<Var> {
        if inputs.len() != op.arity() {
            return Err(TensorError::InvalidArgument(format!(
                "{op:?} takes {} input(s), got {}",
                op.arity(),
                inputs.len()
            )));
        }
        let x = inputs[0];
        match op {
            ElementwiseOp::Add => self.binary(x, inputs[1], BinaryKind::Add),
            ElementwiseOp::Sub => self.binary(x, inputs[1], BinaryKind::Sub),
            ElementwiseOp::Mul => self.binary(x, inputs[1], BinaryKind::Mul),
            ElementwiseOp::Neg => Ok(self.map_unary(x, |v| (-v, -1.0))),
            ElementwiseOp::Scale(c) => Ok(self.map_unary(x, |v| (c * v, c))),
            ElementwiseOp::Exp => Ok(self.map_unary(x, |v| {
                let e = v.exp();
                (e, e)
            })),
            ElementwiseOp::Log => {
                if let Some((index, &value)) = self
                    .value(x)
                    .data
                    .iter()
                    .enumerate()
                    .find(|(_, &v)| !(v > 0.0))
                {
                    return Err(TensorError::LogDomain { index, value });
                }
                Ok(self.map_unary(x, |v| (v.ln(), 1.0 / v)))
            }
            ElementwiseOp::Sigmoid => Ok(self.map_unary(x, |v| {
                let s = sigmoid(v);
                (s, s * (1.0 - s))
            })),
            ElementwiseOp::Tanh => Ok(self.map_unary(x, |v| {
                let t = v.tanh();
                (t, 1.0 - t * t)
            })),
            ElementwiseOp::Relu => Ok(self.map_unary(x, |v| {
                if v > 0.0 {
                    (v, 1.0)
                } else {
                    (0.0, 0.0)
                }
            })),
            ElementwiseOp::LeakyRelu(slope) => Ok(self.map_unary(x, |v| {
                if v > 0.0 {
                    (v, 1.0)
                } else {
                    (slope * v, slope)
                }
            })),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryKind::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryKind::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryKind::Mul)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.map_unary(x, |v| (-v, -1.0))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.map_unary(x, |v| (c * v, c))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.map_unary(x, |v| {
            let e = v.exp();
            (e, e)
        })
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Log, &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map_unary(x, |v| {
            let s = sigmoid(v);
            (s, s * (1.0 - s))
        })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map_unary(x, |v| {
            let t = v.tanh();
            (t, 1.0 - t * t)
        })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map_unary(x, |v| if v > 0.0 { (v, 1.0) } else { (0.0, 0.0) })
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.map_unary(
            x,
            |v| if v > 0.0 { (v, 1.0) } else { (slope * v, slope) },
        )
    }

    /// `log σ(x)` evaluated without forming σ(x).
    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        self.map_unary(x, |v| (log_sigmoid(v), sigmoid(-v)))
    }

    /// Elementwise map where `f` returns `(value, derivative)`.
    ///
    /// Used for closed-form functions whose derivative is known analytically,
    /// such as divergence activations and conjugates.
    pub fn map_with_derivative<F>(&mut self, x: Var, f: F) -> Result<Var>
    where
        F: Fn(f64) -> std::result::Result<(f64, f64), String>,
    {
        let input = &self.nodes[x.0].value;
        let mut values = Vec::with_capacity(input.len());
        let mut local = Vec::with_capacity(input.len());
        for &v in &input.data {
            let (y, d) = f(v).map_err(TensorError::InvalidArgument)?;
            values.push(y);
            local.push(d);
        }
        let value = Tensor {
            shape: input.shape.clone(),
            data: values,
        };
        let rg = self.rg(x);
        Ok(self.push(value, Op::Unary { x: x.0, local }, rg))
    }

    fn map_unary(&mut self, x: Var, f: impl Fn(f64) -> (f64, f64)) -> Var {
        let input = &self.nodes[x.0].value;
        let (values, local): (Vec<f64>, Vec<f64>) = input.data.iter().map(|&v| f(v)).unzip();
        let value = Tensor {
            shape: input.shape.clone(),
            data: values,
        };
        let rg = self.rg(x);
        self.push(value, Op::Unary { x: x.0, local }, rg)
    }

    fn binary(&mut self, a: Var, b: Var, kind: BinaryKind) -> Result<Var> {
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let shape = if va.shape == vb.shape || vb.is_scalar() {
            va.shape.clone()
        } else if va.is_scalar() {
            vb.shape.clone()
        } else {
            return Err(TensorError::ShapeMismatch {
                op: kind.name(),
                lhs: va.shape.clone(),
                rhs: vb.shape.clone(),
            });
        };
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|i| {
                let x = va.data[if va.is_scalar() { 0 } else { i }];
                let y = vb.data[if vb.is_scalar() { 0 } else { i }];
                kind.apply(x, y)
            })
            .collect();
        let rg = self.rg(a) || self.rg(b);
        let op = match kind {
            BinaryKind::Add => Op::Add { a: a.0, b: b.0 },
            BinaryKind::Sub => Op::Sub { a: a.0, b: b.0 },
            BinaryKind::Mul => Op::Mul { a: a.0, b: b.0 },
        };
        Ok(self.push(Tensor { shape, data }, op, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul { a: a.0, b: b.0 }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data.iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum { x: x.0 }, rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data.iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Mean { x: x.0 }, rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape { x: x.0 }, rg))
    }

    /// Picks `x[i, idx[i]]` from each row, giving a `[b, 1]` column.
    ///
    /// The indices are constants: no gradient is attributed to their choice.
    pub fn gather_columns(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let v = self.value(x);
        let (b, k) = matrix_dims(v, "gather_columns")?;
        if idx.len() != b {
            return Err(TensorError::ShapeMismatch {
                op: "gather_columns",
                lhs: v.shape.clone(),
                rhs: vec![idx.len()],
            });
        }
        if let Some((row, &label)) = idx.iter().enumerate().find(|(_, &j)| j >= k) {
            return Err(TensorError::LabelOutOfRange {
                row,
                label,
                classes: k,
            });
        }
        let data = idx.iter().enumerate().map(|(i, &j)| v.data[i * k + j]).collect();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::matrix(b, 1, data)?,
            Op::Gather {
                x: x.0,
                idx: idx.to_vec(),
            },
            rg,
        ))
    }

    /// Identity on the forward pass; scales the upstream gradient by
    /// `-lambda` on the way back.
    pub fn grad_reversal(&mut self, x: Var, lambda: f64) -> Result<Var> {
        if !(lambda >= 0.0) {
            return Err(TensorError::InvalidArgument(format!(
                "gradient reversal coefficient must be nonnegative, got {lambda}"
            )));
        }
        let value = self.value(x).clone();
        let rg = self.rg(x);
        Ok(self.push(value, Op::GradReversal { x: x.0, lambda }, rg))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let v = self.value(logits);
        let (b, k) = matrix_dims(v, "softmax_cross_entropy")?;
        if labels.len() != b {
            return Err(TensorError::ShapeMismatch {
                op: "softmax_cross_entropy",
                lhs: v.shape.clone(),
                rhs: vec![labels.len()],
            });
        }
        let mut probs = vec![0.0; b * k];
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            if y >= k {
                return Err(TensorError::LabelOutOfRange {
                    row: i,
                    label: y,
                    classes: k,
                });
            }
            let row = &v.data[i * k..(i + 1) * k];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = row.iter().map(|&z| (z - max).exp()).sum();
            let log_denom = denom.ln();
            for j in 0..k {
                probs[i * k + j] = (row[j] - max).exp() / denom;
            }
            loss -= row[y] - max - log_denom;
        }
        loss /= b as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent {
                logits: logits.0,
                probs,
                labels: labels.to_vec(),
            },
            rg,
        ))
    }

    /// Reverse pass from a single-element output. Previous gradients are
    /// discarded first, so two calls from identical tapes agree bit for bit.
    pub fn backward(&mut self, out: Var) -> Result<()> {
        if !self.value(out).is_scalar() {
            return Err(TensorError::NotScalar(self.value(out).shape.clone()));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        if !self.nodes[out.0].requires_grad {
            return Ok(());
        }
        self.nodes[out.0].grad = Some(vec![1.0]);
        for i in (0..=out.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            self.propagate(i, &g);
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, target: usize, contrib: impl FnOnce(&mut [f64])) {
        let node = &mut self.nodes[target];
        if !node.requires_grad {
            return;
        }
        let len = node.value.len();
        let buf = node.grad.get_or_insert_with(|| vec![0.0; len]);
        contrib(buf);
    }

    // Pushes d(out_i)/d(inputs) · g into the inputs of node `i`.
    fn propagate(&mut self, i: usize, g: &[f64]) {
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Unary { x, local } => self.accumulate(*x, |buf| {
                for ((b, &gv), &d) in buf.iter_mut().zip(g).zip(local) {
                    *b += gv * d;
                }
            }),
            Op::Add { a, b } => {
                self.accumulate_broadcast(*a, g, 1.0);
                self.accumulate_broadcast(*b, g, 1.0);
            }
            Op::Sub { a, b } => {
                self.accumulate_broadcast(*a, g, 1.0);
                self.accumulate_broadcast(*b, g, -1.0);
            }
            Op::Mul { a, b } => {
                let va = self.nodes[*a].value.clone();
                let vb = self.nodes[*b].value.clone();
                let ga: Vec<f64> = g
                    .iter()
                    .enumerate()
                    .map(|(j, &gv)| gv * vb.data[if vb.is_scalar() { 0 } else { j }])
                    .collect();
                let gb: Vec<f64> = g
                    .iter()
                    .enumerate()
                    .map(|(j, &gv)| gv * va.data[if va.is_scalar() { 0 } else { j }])
                    .collect();
                self.accumulate_broadcast(*a, &ga, 1.0);
                self.accumulate_broadcast(*b, &gb, 1.0);
            }
            Op::MatMul { a, b } => {
                let (m, k) = (self.nodes[*a].value.shape[0], self.nodes[*a].value.shape[1]);
                let n = self.nodes[*b].value.shape[1];
                if self.nodes[*a].requires_grad {
                    let bv = self.nodes[*b].value.data.clone();
                    self.accumulate(*a, |buf| gemm_nt(m, n, k, g, &bv, buf));
                }
                if self.nodes[*b].requires_grad {
                    let av = self.nodes[*a].value.data.clone();
                    self.accumulate(*b, |buf| gemm_tn(m, k, n, &av, g, buf));
                }
            }
            Op::Sum { x } => self.accumulate(*x, |buf| {
                for b in buf.iter_mut() {
                    *b += g[0];
                }
            }),
            Op::Mean { x } => {
                let n = self.nodes[*x].value.len() as f64;
                self.accumulate(*x, |buf| {
                    for b in buf.iter_mut() {
                        *b += g[0] / n;
                    }
                })
            }
            Op::Reshape { x } => self.accumulate(*x, |buf| {
                for (b, &gv) in buf.iter_mut().zip(g) {
                    *b += gv;
                }
            }),
            Op::Gather { x, idx } => {
                let k = self.nodes[*x].value.shape[1];
                self.accumulate(*x, |buf| {
                    for (row, &j) in idx.iter().enumerate() {
                        buf[row * k + j] += g[row];
                    }
                })
            }
            Op::GradReversal { x, lambda } => {
                let factor = -*lambda;
                self.accumulate(*x, |buf| {
                    for (b, &gv) in buf.iter_mut().zip(g) {
                        *b += factor * gv;
                    }
                })
            }
            Op::SoftmaxXent {
                logits,
                probs,
                labels,
            } => {
                let b = labels.len();
                let k = probs.len() / b;
                let scale = g[0] / b as f64;
                self.accumulate(*logits, |buf| {
                    for (r, &y) in labels.iter().enumerate() {
                        for j in 0..k {
                            let target = if j == y { 1.0 } else { 0.0 };
                            buf[r * k + j] += scale * (probs[r * k + j] - target);
                        }
                    }
                })
            }
        }
        self.nodes[i].op = op;
    }

    fn accumulate_broadcast(&mut self, target: usize, g: &[f64], sign: f64) {
        let target_scalar = self.nodes[target].value.is_scalar() && g.len() != 1;
        self.accumulate(target, |buf| {
            if target_scalar {
                buf[0] += sign * g.iter().sum::<f64>();
            } else {
                for (b, &gv) in buf.iter_mut().zip(g) {
                    *b += sign * gv;
                }
            }
        })
    }
}

#[derive(Clone, Copy)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
}

impl BinaryKind {
    fn name(self) -> &'static str {
        match self {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
        }
    }

    fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            BinaryKind::Add => x + y,
            BinaryKind::Sub => x - y,
            BinaryKind::Mul => x * y,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x) = -softplus(-x)`, stable for large |x|.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Evaluates `f` on a fresh tape with `point` as a single trainable leaf of
/// the given shape, and returns the scalar output with its gradient.
pub fn value_and_grad<F>(shape: &[usize], point: &[f64], f: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.param(Tensor::new(shape.to_vec(), point.to_vec())?);
    let out = f(&mut tape, x)?;
    tape.backward(out)?;
    let value = tape.value(out).item();
    let grad = tape
        .grad_slice(x)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; point.len()]);
    Ok((value, grad))
}

/// Largest coordinatewise disagreement between `analytic` and a central
/// difference of `f` at `point`, measured as
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn finite_diff_check<F>(mut f: F, point: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(TensorError::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if point.len() != analytic.len() {
        return Err(TensorError::ShapeMismatch {
            op: "finite_diff_check",
            lhs: vec![point.len()],
            rhs: vec![analytic.len()],
        });
    }
    let mut x = point.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let up = f(&x);
        x[i] = orig - eps;
        let down = f(&x);
        x[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(TensorError::NonFinite(format!(
                "objective at coordinate {i} perturbed by ±{eps}"
            )));
        }
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(0.0));
        let y = tape.elementwise(ElementwiseOp::Sigmoid, &[x]).unwrap();
        assert_eq!(tape.value(y).item(), 0.5);
    }

    #[test]
    fn log_of_one_and_its_slope() {
        let (v, g) = value_and_grad(&[1], &[1.0], |t, x| t.log(x)).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn log_rejects_non_positive() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(vec![3], vec![1.0, 0.0, -2.0]).unwrap());
        let err = tape.log(x).unwrap_err();
        assert_eq!(err, TensorError::LogDomain { index: 1, value: 0.0 });
    }

    #[test]
    fn leaky_relu_negative_branch() {
        let (v, g) =
            value_and_grad(&[1], &[-2.0], |t, x| Ok(t.leaky_relu(x, DEFAULT_LEAKY_SLOPE))).unwrap();
        assert!(close(v, -0.02, 1e-15));
        assert_eq!(g, vec![0.01]);
    }

    #[test]
    fn add_rejects_incompatible_shapes() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::zeros(&[2, 3]));
        let b = tape.param(Tensor::zeros(&[3, 2]));
        assert!(matches!(tape.add(a, b), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn scalar_broadcast_gradient_sums() {
        let (_, g) = value_and_grad(&[1], &[2.0], |t, s| {
            let x = t.constant(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
            let y = t.mul(x, s)?;
            Ok(t.sum(y))
        })
        .unwrap();
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn matmul_identity_and_orthogonal_rows() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(Tensor::identity(2).matmul(&a).unwrap(), a);
        let r = Tensor::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let c = Tensor::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(r.matmul(&c).unwrap().data(), &[0.0]);
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::zeros(&[2, 3]));
        let b = tape.param(Tensor::zeros(&[2, 3]));
        assert!(tape.matmul(a, b).is_err());
    }

    #[test]
    fn cross_entropy_uniform_and_saturated() {
        let mut tape = Tape::new();
        let logits = tape.param(Tensor::filled(&[1, 4], 0.3));
        let l = tape.softmax_cross_entropy(logits, &[2]).unwrap();
        assert!(close(tape.value(l).item(), 4f64.ln(), 1e-12));

        let logits = tape.param(Tensor::from_rows(&[vec![1000.0, 0.0, 0.0]]).unwrap());
        let l = tape.softmax_cross_entropy(logits, &[0]).unwrap();
        assert!(tape.value(l).item().abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let mut tape = Tape::new();
        let logits = tape.param(Tensor::zeros(&[2, 3]));
        let err = tape.softmax_cross_entropy(logits, &[0, 3]).unwrap_err();
        assert!(matches!(err, TensorError::LabelOutOfRange { row: 1, label: 3, .. }));
    }

    #[test]
    fn grad_reversal_forward_and_backward() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let y = tape.grad_reversal(x, 0.6).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0]);
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad_slice(x).unwrap(), &[-0.6, -0.6]);

        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let y = tape.grad_reversal(x, 0.0).unwrap();
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert!(tape.grad_slice(x).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn grad_reversal_rejects_negative_lambda() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(1.0));
        assert!(tape.grad_reversal(x, -0.1).is_err());
    }

    #[test]
    fn double_reversal_restores_gradient() {
        let (_, g) = value_and_grad(&[3], &[0.5, -1.0, 2.0], |t, x| {
            let y = t.grad_reversal(x, 1.0)?;
            let y = t.grad_reversal(y, 1.0)?;
            let y = t.tanh(y);
            Ok(t.sum(y))
        })
        .unwrap();
        let (_, plain) = value_and_grad(&[3], &[0.5, -1.0, 2.0], |t, x| {
            let y = t.tanh(x);
            Ok(t.sum(y))
        })
        .unwrap();
        assert_eq!(g, plain);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[2]));
        assert!(matches!(tape.backward(x), Err(TensorError::NotScalar(_))));
    }

    #[test]
    fn clear_frees_nodes() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(1.0));
        let _ = tape.exp(x);
        assert_eq!(tape.len(), 2);
        tape.clear();
        assert!(tape.is_empty());
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::scalar(3.0));
        let x = tape.param(Tensor::scalar(2.0));
        let y = tape.mul(c, x).unwrap();
        tape.backward(y).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad_slice(x).unwrap(), &[3.0]);
    }

    #[test]
    fn finite_diff_square_and_constant() {
        let err = finite_diff_check(|x| x[0] * x[0], &[3.0], &[6.0], 1e-5).unwrap();
        assert!(err < 1e-6);
        let err = finite_diff_check(|_| 4.2, &[1.0, 2.0], &[0.0, 0.0], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn finite_diff_reports_non_finite() {
        let r = finite_diff_check(|x| x[0].ln(), &[0.0], &[1.0], 1e-5);
        assert!(matches!(r, Err(TensorError::NonFinite(_))));
    }

    #[test]
    fn argmax_ties_go_low() {
        let t = Tensor::from_rows(&[vec![1.0, 3.0, 3.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(t.argmax_rows(), vec![1, 0]);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(Tensor::new(vec![0, 2], vec![]).is_err());
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![1.0]),
            Err(TensorError::DataLength { .. })
        ));
    }
}
