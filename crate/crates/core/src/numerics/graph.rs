//! Tape-based reverse-mode differentiation over rank-2 tensors.
//!
//! A [`Graph`] records every primitive applied during the forward pass.
//! Parameter leaves read their values straight from a borrowed [`ParamStore`]
//! so building a graph never copies weights. [`Graph::backward`] walks the tape
//! in reverse and returns gradients for every node that depends on a
//! parameter or a differentiable input.

use super::{ParamId, ParamStore, Tensor};
use crate::error::{Result, ShineError};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    Softmax(Var),
    RowNormalize(Var),
    Log(Var, f64),
    Gelu(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    MeanRows(Var),
    MaxRows(Var, Vec<usize>),
    Sum(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Tensor,
        inv_std: Vec<f64>,
    },
}

struct Node {
    value: Option<Tensor>,
    op: Op,
    requires_grad: bool,
}

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

/// Output of [`Graph::backward`].
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<(ParamId, Tensor)>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.nodes[var.0].as_ref()
    }

    pub fn params(&self) -> &[(ParamId, Tensor)] {
        &self.params
    }

    pub fn into_params(self) -> Vec<(ParamId, Tensor)> {
        self.params
    }
}

const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            _ => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(ShineError::Numeric(format!(
                "non-finite value produced by {}",
                op_name(&op)
            )));
        }
        self.nodes.push(Node {
            value: Some(value),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Input, false)
    }

    /// Differentiable input (used by gradient checks on free tensors).
    pub fn variable(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Input, true)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn param_by_name(&mut self, name: &str) -> Result<Var> {
        let id = self
            .store
            .id(name)
            .ok_or_else(|| ShineError::Config(format!("unknown parameter {name}")))?;
        Ok(self.param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(out, Op::Transpose(a), rg)
    }

    fn zip_same(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(ShineError::shape(op, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("add", a, b, |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Mul(a, b), rg)
    }

    /// Adds a `1 × n` row to every row of an `m × n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(ShineError::shape("add_row", ta.shape(), tr.shape()));
        }
        let mut out = ta.clone();
        let n = ta.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += tr.data()[i % n];
        }
        let rg = self.rg(a) || self.rg(row);
        self.push(out, Op::AddRow(a, row), rg)
    }

    /// Elementwise product with a constant tensor (masks, dropout, fixed weights).
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        let ta = self.value(a);
        if !ta.same_shape(&c) {
            return Err(ShineError::shape("mul_const", ta.shape(), c.shape()));
        }
        let data = ta.data().iter().zip(c.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(a);
        self.push(out, Op::MulConst(a, c), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v * s);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, s), rg)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.softmax_masked(a, None)
    }

    /// Row-wise softmax over the columns where `col_mask` is true; masked
    /// columns get exactly zero weight.
    pub fn softmax_masked(&mut self, a: Var, col_mask: Option<&[bool]>) -> Result<Var> {
        let ta = self.value(a);
        let cols = ta.cols();
        if let Some(m) = col_mask {
            if m.len() != cols {
                return Err(ShineError::shape("softmax_masked", ta.shape(), &[m.len()]));
            }
            if !m.iter().any(|&b| b) {
                return Err(ShineError::Numeric("softmax over a fully masked row".into()));
            }
        }
        let keep = |j: usize| col_mask.is_none_or(|m| m[j]);
        let mut out = Tensor::zeros_like(ta);
        for r in 0..ta.rows() {
            let row = ta.row(r);
            let max = (0..cols)
                .filter(|&j| keep(j))
                .map(|j| row[j])
                .fold(f64::NEG_INFINITY, f64::max);
            let o = out.row_mut(r);
            let mut total = 0.0;
            for j in 0..cols {
                if keep(j) {
                    o[j] = (row[j] - max).exp();
                    total += o[j];
                }
            }
            for v in o.iter_mut() {
                *v /= total;
            }
        }
        let rg = self.rg(a);
        self.push(out, Op::Softmax(a), rg)
    }

    /// Divides every row by its sum. Rows must have a positive sum.
    pub fn row_normalize(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let mut out = ta.clone();
        for r in 0..ta.rows() {
            let total: f64 = ta.row(r).iter().sum();
            if !(total > f64::MIN_POSITIVE) {
                return Err(ShineError::Numeric(format!(
                    "row {r} has non-positive normalizer {total}"
                )));
            }
            for v in out.row_mut(r) {
                *v /= total;
            }
        }
        let rg = self.rg(a);
        self.push(out, Op::RowNormalize(a), rg)
    }

    /// `ln(max(x, eps))`; the gradient is zero where the clamp is active.
    pub fn log(&mut self, a: Var, eps: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v.max(eps).ln());
        let rg = self.rg(a);
        self.push(out, Op::Log(a, eps), rg)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(gelu);
        let rg = self.rg(a);
        self.push(out, Op::Gelu(a), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(ShineError::Empty("concat_cols of nothing".into()));
        };
        let rows = self.value(first).rows();
        let mut total = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(ShineError::shape("concat_cols", self.value(first).shape(), t.shape()));
            }
            total += t.cols();
        }
        let mut out = Tensor::zeros(rows, total);
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            let c = t.cols();
            for r in 0..rows {
                out.row_mut(r)[offset..offset + c].copy_from_slice(t.row(r));
            }
            offset += c;
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(out, Op::ConcatCols(parts.to_vec()), rg)
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let ta = self.value(a);
        if start >= end || end > ta.cols() {
            return Err(ShineError::shape("slice_cols", ta.shape(), &[start, end]));
        }
        let mut out = Tensor::zeros(ta.rows(), end - start);
        for r in 0..ta.rows() {
            out.row_mut(r).copy_from_slice(&ta.row(r)[start..end]);
        }
        let rg = self.rg(a);
        self.push(out, Op::SliceCols(a, start), rg)
    }

    /// Selects rows by index (embedding lookup, span slicing).
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        if indices.is_empty() {
            return Err(ShineError::Empty("gather_rows with no indices".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= ta.rows()) {
            return Err(ShineError::shape("gather_rows", ta.shape(), &[bad]));
        }
        let mut out = Tensor::zeros(indices.len(), ta.cols());
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(ta.row(i));
        }
        let rg = self.rg(a);
        self.push(out, Op::GatherRows(a, indices.to_vec()), rg)
    }

    /// Mean over rows: `m × n → 1 × n`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let m = ta.rows() as f64;
        let mut out = Tensor::zeros(1, ta.cols());
        for r in 0..ta.rows() {
            for (o, v) in out.data_mut().iter_mut().zip(ta.row(r)) {
                *o += v;
            }
        }
        for o in out.data_mut() {
            *o /= m;
        }
        let rg = self.rg(a);
        self.push(out, Op::MeanRows(a), rg)
    }

    /// Max over rows: `m × n → 1 × n`; ties resolve to the first row.
    pub fn max_rows(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let n = ta.cols();
        let mut out = Tensor::row_vector(ta.row(0).to_vec());
        let mut arg = vec![0; n];
        for r in 1..ta.rows() {
            for (j, &v) in ta.row(r).iter().enumerate() {
                if v > out.data()[j] {
                    out.data_mut()[j] = v;
                    arg[j] = r;
                }
            }
        }
        let rg = self.rg(a);
        self.push(out, Op::MaxRows(a, arg), rg)
    }

    /// Sum of all entries as a `1 × 1` tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(total), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len() as f64;
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n)
    }

    /// Row-wise layer normalization with `1 × n` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let tx = self.value(x);
        let (tg, tb) = (self.value(gain), self.value(bias));
        let n = tx.cols();
        if tg.shape() != [1, n] || tb.shape() != [1, n] {
            return Err(ShineError::shape("layer_norm", tx.shape(), tg.shape()));
        }
        let mut normalized = Tensor::zeros_like(tx);
        let mut out = Tensor::zeros_like(tx);
        let mut inv_std = Vec::with_capacity(tx.rows());
        for r in 0..tx.rows() {
            let row = tx.row(r);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            let nr = normalized.row_mut(r);
            for j in 0..n {
                nr[j] = (row[j] - mean) * is;
            }
            let or = out.row_mut(r);
            for j in 0..n {
                or[j] = nr[j] * tg.data()[j] + tb.data()[j];
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
            rg,
        )
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(ShineError::shape("backward", lt.shape(), &[1, 1]));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(gy) = grads[idx].take() else { continue };
            self.propagate(idx, &gy, &mut grads)?;
            grads[idx] = Some(gy);
        }

        let mut params = Vec::new();
        for (i, pv) in self.param_vars.iter().enumerate() {
            if let Some(v) = pv {
                if let Some(g) = &grads[v.0] {
                    if !g.is_finite() {
                        return Err(ShineError::Numeric(format!(
                            "non-finite gradient for {}",
                            self.store.get(ParamId(i)).name
                        )));
                    }
                    params.push((ParamId(i), g.clone()));
                }
            }
        }
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }

    fn propagate(&self, idx: usize, gy: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        let y = self.value(Var(idx));
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    // dA = dY · Bᵀ
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    let mut da = Tensor::zeros(m, k);
                    for i in 0..m {
                        let gr = gy.row(i);
                        let dr = da.row_mut(i);
                        for (p, d) in dr.iter_mut().enumerate() {
                            let br = &tb.data()[p * n..(p + 1) * n];
                            *d = gr.iter().zip(br).map(|(x, y)| x * y).sum();
                        }
                    }
                    accumulate(grads, *a, da);
                }
                if self.rg(*b) {
                    // dB = Aᵀ · dY
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    let mut db = Tensor::zeros(k, n);
                    for i in 0..m {
                        let gr = gy.row(i);
                        for p in 0..k {
                            let av = ta.data()[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for (d, g) in db.row_mut(p).iter_mut().zip(gr) {
                                *d += av * g;
                            }
                        }
                    }
                    accumulate(grads, *b, db);
                }
            }
            Op::Transpose(a) => accumulate(grads, *a, gy.transpose()),
            Op::Add(a, b) => {
                self.pass(grads, *a, gy.clone());
                self.pass(grads, *b, gy.clone());
            }
            Op::Sub(a, b) => {
                self.pass(grads, *a, gy.clone());
                self.pass(grads, *b, gy.map(|v| -v));
            }
            Op::AddRow(a, row) => {
                self.pass(grads, *a, gy.clone());
                if self.rg(*row) {
                    let n = gy.cols();
                    let mut dr = Tensor::zeros(1, n);
                    for r in 0..gy.rows() {
                        for (d, g) in dr.data_mut().iter_mut().zip(gy.row(r)) {
                            *d += g;
                        }
                    }
                    accumulate(grads, *row, dr);
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.rg(*a) {
                    accumulate(grads, *a, hadamard(gy, tb));
                }
                if self.rg(*b) {
                    accumulate(grads, *b, hadamard(gy, ta));
                }
            }
            Op::MulConst(a, c) => self.pass(grads, *a, hadamard(gy, c)),
            Op::Scale(a, s) => self.pass(grads, *a, gy.map(|v| v * s)),
            Op::Softmax(a) => {
                let mut dx = Tensor::zeros_like(y);
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), gy.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, g)| p * g).sum();
                    for ((d, p), g) in dx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *d = p * (g - dot);
                    }
                }
                self.pass(grads, *a, dx);
            }
            Op::RowNormalize(a) => {
                let ta = self.value(*a);
                let mut dx = Tensor::zeros_like(y);
                for r in 0..y.rows() {
                    let total: f64 = ta.row(r).iter().sum();
                    let (yr, gr) = (y.row(r), gy.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, g)| p * g).sum();
                    for (d, g) in dx.row_mut(r).iter_mut().zip(gr) {
                        *d = (g - dot) / total;
                    }
                }
                self.pass(grads, *a, dx);
            }
            Op::Log(a, eps) => {
                let ta = self.value(*a);
                let data = ta
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&x, &g)| if x > *eps { g / x } else { 0.0 })
                    .collect();
                self.pass(grads, *a, Tensor::new(ta.shape().to_vec(), data)?);
            }
            Op::Gelu(a) => {
                let ta = self.value(*a);
                let data = ta
                    .data()
                    .iter()
                    .zip(gy.data())
                    .map(|(&x, &g)| g * gelu_grad(x))
                    .collect();
                self.pass(grads, *a, Tensor::new(ta.shape().to_vec(), data)?);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    if self.rg(p) {
                        let mut dp = Tensor::zeros(gy.rows(), c);
                        for r in 0..gy.rows() {
                            dp.row_mut(r).copy_from_slice(&gy.row(r)[offset..offset + c]);
                        }
                        accumulate(grads, p, dp);
                    }
                    offset += c;
                }
            }
            Op::SliceCols(a, start) => {
                if self.rg(*a) {
                    let ta = self.value(*a);
                    let mut da = Tensor::zeros_like(ta);
                    let c = gy.cols();
                    for r in 0..gy.rows() {
                        da.row_mut(r)[*start..*start + c].copy_from_slice(gy.row(r));
                    }
                    accumulate(grads, *a, da);
                }
            }
            Op::GatherRows(a, indices) => {
                if self.rg(*a) {
                    let ta = self.value(*a);
                    let mut da = Tensor::zeros_like(ta);
                    for (r, &i) in indices.iter().enumerate() {
                        for (d, g) in da.row_mut(i).iter_mut().zip(gy.row(r)) {
                            *d += g;
                        }
                    }
                    accumulate(grads, *a, da);
                }
            }
            Op::MeanRows(a) => {
                if self.rg(*a) {
                    let ta = self.value(*a);
                    let m = ta.rows() as f64;
                    let mut da = Tensor::zeros_like(ta);
                    for r in 0..ta.rows() {
                        for (d, g) in da.row_mut(r).iter_mut().zip(gy.data()) {
                            *d = g / m;
                        }
                    }
                    accumulate(grads, *a, da);
                }
            }
            Op::MaxRows(a, arg) => {
                if self.rg(*a) {
                    let mut da = Tensor::zeros_like(self.value(*a));
                    for (j, &r) in arg.iter().enumerate() {
                        da.set(r, j, gy.data()[j]);
                    }
                    accumulate(grads, *a, da);
                }
            }
            Op::Sum(a) => {
                if self.rg(*a) {
                    let g = gy.item();
                    let ta = self.value(*a);
                    accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), vec![g; ta.len()])?);
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let n = gy.cols();
                let tg = self.value(*gain);
                if self.rg(*gain) || self.rg(*bias) {
                    let mut dg = Tensor::zeros(1, n);
                    let mut db = Tensor::zeros(1, n);
                    for r in 0..gy.rows() {
                        for j in 0..n {
                            dg.data_mut()[j] += gy.get(r, j) * normalized.get(r, j);
                            db.data_mut()[j] += gy.get(r, j);
                        }
                    }
                    self.pass(grads, *gain, dg);
                    self.pass(grads, *bias, db);
                }
                if self.rg(*x) {
                    let mut dx = Tensor::zeros_like(gy);
                    for r in 0..gy.rows() {
                        let xh = normalized.row(r);
                        let dxh: Vec<f64> = (0..n).map(|j| gy.get(r, j) * tg.data()[j]).collect();
                        let mean_d = dxh.iter().sum::<f64>() / n as f64;
                        let mean_dx = dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        for (j, d) in dx.row_mut(r).iter_mut().enumerate() {
                            *d = inv_std[r] * (dxh[j] - mean_d - xh[j] * mean_dx);
                        }
                    }
                    accumulate(grads, *x, dx);
                }
            }
        }
        Ok(())
    }

    fn pass(&self, grads: &mut [Option<Tensor>], to: Var, g: Tensor) {
        if self.rg(to) {
            accumulate(grads, to, g);
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], to: Var, g: Tensor) {
    match &mut grads[to.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shapes checked at forward time")
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Input => "input",
        Op::Param(_) => "param",
        Op::MatMul(..) => "matmul",
        Op::Transpose(_) => "transpose",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::AddRow(..) => "add_row",
        Op::Mul(..) => "mul",
        Op::MulConst(..) => "mul_const",
        Op::Scale(..) => "scale",
        Op::Softmax(_) => "softmax",
        Op::RowNormalize(_) => "row_normalize",
        Op::Log(..) => "log",
        Op::Gelu(_) => "gelu",
        Op::ConcatCols(_) => "concat_cols",
        Op::SliceCols(..) => "slice_cols",
        Op::GatherRows(..) => "gather_rows",
        Op::MeanRows(_) => "mean_rows",
        Op::MaxRows(..) => "max_rows",
        Op::Sum(_) => "sum",
        Op::LayerNorm { .. } => "layer_norm",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.variable(Tensor::from_rows(2, 3, vec![1., -2., 3., 0.5, 0., 9.]).unwrap()).unwrap();
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn softmax_first_entry_gradient() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.variable(Tensor::row_vector(vec![0.0, 0.0])).unwrap();
        let p = g.softmax(x).unwrap();
        let first = g.mul_const(p, Tensor::row_vector(vec![1.0, 0.0])).unwrap();
        let loss = g.sum(first).unwrap();
        let grads = g.backward(loss).unwrap();
        let d = grads.get(x).unwrap().data();
        assert!((d[0] - 0.25).abs() < 1e-15 && (d[1] + 0.25).abs() < 1e-15, "{d:?}");
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.input(Tensor::zeros(2, 3)).unwrap();
        let b = g.input(Tensor::zeros(2, 3)).unwrap();
        match g.matmul(a, b) {
            Err(ShineError::Shape { left, right, .. }) => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![2, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.input(Tensor::row_vector(vec![1e308])).unwrap();
        assert!(matches!(g.scale(a, 10.0), Err(ShineError::Numeric(_))));
        let z = g.input(Tensor::row_vector(vec![0.0, 0.0])).unwrap();
        assert!(matches!(g.row_normalize(z), Err(ShineError::Numeric(_))));
        let s = g.input(Tensor::row_vector(vec![1.0, 2.0])).unwrap();
        assert!(matches!(
            g.softmax_masked(s, Some(&[false, false])),
            Err(ShineError::Numeric(_))
        ));
    }

    #[test]
    fn masked_softmax_zeroes_masked_columns() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let s = g.input(Tensor::row_vector(vec![1.0, 2.0, 30.0])).unwrap();
        let p = g.softmax_masked(s, Some(&[true, true, false])).unwrap();
        let v = g.value(p).data();
        assert_eq!(v[2], 0.0);
        assert!((v[0] + v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn params_are_shared_within_a_graph() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::scalar(3.0)).unwrap();
        let mut g = Graph::new(&store);
        let w1 = g.param(id);
        let w2 = g.param(id);
        assert_eq!(w1, w2);
        let y = g.mul(w1, w2).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.params()[0].1.item(), 6.0);
    }
}
