//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] borrows a [`ParamStore`] immutably and records every operation
//! applied to [`Var`] handles. Parameters are read in place, never copied.
//! [`Tape::backward`] walks the recorded nodes in reverse creation order
//! (which is a reverse topological order, since an operation can only refer
//! to nodes created before it) and returns a [`Gradients`] set that the
//! caller folds into the store with [`ParamStore::accumulate`].

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{gemm, Tensor};
use super::NnError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Elu(Var),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    SegmentSoftmax(Var, Vec<usize>),
    MulColumn(Var, Var),
    DivColumn(Var, Var),
    PickCols(Var, Vec<usize>),
    StraightThrough(Var),
    Square(Var),
    Mean(Var),
    Sum(Var),
}

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

struct Node {
    value: Value,
    op: Op,
    requires_grad: bool,
}

/// Operation recorder bound to one parameter store.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
    consumed: bool,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            consumed: false,
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.value(*id),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var, NnError> {
        if !value.all_finite() {
            return Err(NnError::NonFinite(format!("output of {op:?}")));
        }
        let requires_grad = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            other => inputs(other).iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a value that no gradient flows into.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op: Op::Constant,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param(id),
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn param_named(&mut self, name: &str) -> Result<Var, NnError> {
        let id = self.params.id(name)?;
        Ok(self.param(id))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(), NnError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(NnError::Shape(format!("{what}: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(out, Op::MatMul(a, b))
    }

    /// `x [N×D] + bias [1×D]`, broadcast over rows.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, NnError> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(NnError::Shape(format!(
                "bias {:?} for input {:?}",
                bv.shape(),
                xv.shape()
            )));
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_slice_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        self.push(out, Op::AddBias(x, bias))
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var, NnError> {
        self.same_shape(a, b, "element-wise op")?;
        let (av, bv) = (self.value(a), self.value(b));
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::from_vec(av.rows(), av.cols(), data)?;
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var, NnError> {
        let out = self.value(x).map(|v| v * c);
        self.push(out, Op::Scale(x, c))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, NnError> {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var, NnError> {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu(x, slope))
    }

    /// ELU with scale 1.
    pub fn elu(&mut self, x: Var) -> Result<Var, NnError> {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { v.exp_m1() });
        self.push(out, Op::Elu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, NnError> {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, NnError> {
        let out = self.value(x).map(f64::tanh);
        self.push(out, Op::Tanh(x))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let rows = parts.first().map_or(0, |p| self.value(*p).rows());
        if parts.iter().any(|p| self.value(*p).rows() != rows) {
            return Err(NnError::Shape("concat_cols: row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let dst = out.row_slice_mut(r);
            let mut at = 0;
            for p in parts {
                let src = match &self.nodes[p.0].value {
                    Value::Owned(t) => t.row_slice(r),
                    Value::Param(id) => self.params.value(*id).row_slice(r),
                };
                dst[at..at + src.len()].copy_from_slice(src);
                at += src.len();
            }
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let xv = self.value(x);
        if start + len > xv.cols() {
            return Err(NnError::Shape(format!("slice_cols {start}+{len} of {:?}", xv.shape())));
        }
        let mut out = Tensor::zeros(xv.rows(), len);
        for r in 0..xv.rows() {
            out.row_slice_mut(r).copy_from_slice(&xv.row_slice(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols(x, start))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let xv = self.value(x);
        if start + len > xv.rows() {
            return Err(NnError::Shape(format!("slice_rows {start}+{len} of {:?}", xv.shape())));
        }
        let c = xv.cols();
        let out = Tensor::from_vec(len, c, xv.data()[start * c..(start + len) * c].to_vec())?;
        self.push(out, Op::SliceRows(x, start))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, NnError> {
        let mut out = self.value(x).clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_slice_mut(r));
        }
        self.push(out, Op::SoftmaxRows(x))
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Result<Var, NnError> {
        let mut out = self.value(x).clone();
        for r in 0..out.rows() {
            let row = out.row_slice_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.push(out, Op::LogSoftmaxRows(x))
    }

    /// Output row `r` is input row `index[r]`.
    pub fn gather_rows(&mut self, x: Var, index: &[usize]) -> Result<Var, NnError> {
        let xv = self.value(x);
        if let Some(bad) = index.iter().find(|&&i| i >= xv.rows()) {
            return Err(NnError::Shape(format!("gather row {bad} of {:?}", xv.shape())));
        }
        let mut out = Tensor::zeros(index.len(), xv.cols());
        for (r, &i) in index.iter().enumerate() {
            out.row_slice_mut(r).copy_from_slice(xv.row_slice(i));
        }
        self.push(out, Op::GatherRows(x, index.to_vec()))
    }

    /// Sums input row `r` into output row `index[r]`; the output has
    /// `out_rows` rows. Rows are summed in input order.
    pub fn scatter_add_rows(&mut self, x: Var, index: &[usize], out_rows: usize) -> Result<Var, NnError> {
        let xv = self.value(x);
        if index.len() != xv.rows() || index.iter().any(|&i| i >= out_rows) {
            return Err(NnError::Shape("scatter_add_rows index out of range".into()));
        }
        let mut out = Tensor::zeros(out_rows, xv.cols());
        for (r, &i) in index.iter().enumerate() {
            for (o, v) in out.row_slice_mut(i).iter_mut().zip(xv.row_slice(r)) {
                *o += v;
            }
        }
        self.push(out, Op::ScatterAddRows(x, index.to_vec()))
    }

    /// Softmax of a column vector within groups: entries sharing a segment
    /// id are normalised together.
    pub fn segment_softmax(&mut self, x: Var, segments: &[usize]) -> Result<Var, NnError> {
        let xv = self.value(x);
        if xv.cols() != 1 || segments.len() != xv.rows() {
            return Err(NnError::Shape("segment_softmax expects an [E×1] input with E segment ids".into()));
        }
        let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (&s, &v) in segments.iter().zip(xv.data()) {
            max[s] = max[s].max(v);
        }
        let mut out: Vec<f64> = segments.iter().zip(xv.data()).map(|(&s, &v)| (v - max[s]).exp()).collect();
        let mut denom = vec![0.0; n_seg];
        for (&s, &e) in segments.iter().zip(&out) {
            denom[s] += e;
        }
        for (o, &s) in out.iter_mut().zip(segments) {
            *o /= denom[s];
        }
        let out = Tensor::from_vec(segments.len(), 1, out)?;
        self.push(out, Op::SegmentSoftmax(x, segments.to_vec()))
    }

    /// `x [E×D]` with each row multiplied by the matching entry of `s [E×1]`.
    pub fn mul_column(&mut self, x: Var, s: Var) -> Result<Var, NnError> {
        let (xv, sv) = (self.value(x), self.value(s));
        if sv.cols() != 1 || sv.rows() != xv.rows() {
            return Err(NnError::Shape(format!("mul_column {:?} by {:?}", xv.shape(), sv.shape())));
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            let k = sv.data()[r];
            out.row_slice_mut(r).iter_mut().for_each(|v| *v *= k);
        }
        self.push(out, Op::MulColumn(x, s))
    }

    /// `x [E×D]` with each row divided by the matching entry of `s [E×1]`.
    pub fn div_column(&mut self, x: Var, s: Var) -> Result<Var, NnError> {
        let (xv, sv) = (self.value(x), self.value(s));
        if sv.cols() != 1 || sv.rows() != xv.rows() {
            return Err(NnError::Shape(format!("div_column {:?} by {:?}", xv.shape(), sv.shape())));
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            let k = sv.data()[r];
            out.row_slice_mut(r).iter_mut().for_each(|v| *v /= k);
        }
        self.push(out, Op::DivColumn(x, s))
    }

    /// `[N×1]` column holding `x[r, index[r]]`.
    pub fn pick_cols(&mut self, x: Var, index: &[usize]) -> Result<Var, NnError> {
        let xv = self.value(x);
        if index.len() != xv.rows() || index.iter().any(|&c| c >= xv.cols()) {
            return Err(NnError::Shape("pick_cols index out of range".into()));
        }
        let data = index.iter().enumerate().map(|(r, &c)| xv.get(r, c)).collect();
        let out = Tensor::from_vec(index.len(), 1, data)?;
        self.push(out, Op::PickCols(x, index.to_vec()))
    }

    /// Forward value `hard`, backward identity into `soft`.
    pub fn straight_through(&mut self, soft: Var, hard: Tensor) -> Result<Var, NnError> {
        if hard.shape() != self.value(soft).shape() {
            return Err(NnError::Shape("straight_through: hard and soft shapes differ".into()));
        }
        self.push(hard, Op::StraightThrough(soft))
    }

    pub fn square(&mut self, x: Var) -> Result<Var, NnError> {
        let out = self.value(x).map(|v| v * v);
        self.push(out, Op::Square(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, NnError> {
        let xv = self.value(x);
        if xv.is_empty() {
            return Err(NnError::Shape("mean of an empty tensor".into()));
        }
        let out = Tensor::scalar(xv.sum() / xv.len() as f64);
        self.push(out, Op::Mean(x))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, NnError> {
        let out = Tensor::scalar(self.value(x).sum());
        self.push(out, Op::Sum(x))
    }

    /// Back-propagates from a `1 × 1` loss. A tape can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NnError> {
        if self.consumed {
            return Err(NnError::TapeConsumed);
        }
        if self.value(loss).shape() != [1, 1] {
            return Err(NnError::NotScalar(self.value(loss).shape()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut out = vec![None; self.params.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            match &self.nodes[idx].op {
                Op::Constant => {}
                Op::Param(id) => accumulate(&mut out[id.0], dy),
                op => {
                    for (input, g) in self.input_grads(idx, op, &dy) {
                        if self.nodes[input.0].requires_grad {
                            accumulate(&mut grads[input.0], g);
                        }
                    }
                }
            }
        }
        Ok(Gradients { grads: out })
    }

    fn input_grads(&self, idx: usize, op: &Op, dy: &Tensor) -> Vec<(Var, Tensor)> {
        let y = self.value(Var(idx));
        match op {
            Op::Constant | Op::Param(_) => Vec::new(),
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut out = Vec::with_capacity(2);
                if self.nodes[a.0].requires_grad {
                    let mut da = Tensor::zeros(av.rows(), av.cols());
                    gemm(false, dy, true, bv, 0.0, &mut da);
                    out.push((*a, da));
                }
                if self.nodes[b.0].requires_grad {
                    let mut db = Tensor::zeros(bv.rows(), bv.cols());
                    gemm(true, av, false, dy, 0.0, &mut db);
                    out.push((*b, db));
                }
                out
            }
            Op::AddBias(x, b) => {
                let mut db = Tensor::zeros(1, dy.cols());
                for r in 0..dy.rows() {
                    for (acc, g) in db.data_mut().iter_mut().zip(dy.row_slice(r)) {
                        *acc += g;
                    }
                }
                vec![(*x, dy.clone()), (*b, db)]
            }
            Op::Add(a, b) => vec![(*a, dy.clone()), (*b, dy.clone())],
            Op::Sub(a, b) => vec![(*a, dy.clone()), (*b, dy.map(|g| -g))],
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                vec![(*a, zip(dy, bv, |g, v| g * v)), (*b, zip(dy, av, |g, v| g * v))]
            }
            Op::Scale(x, c) => vec![(*x, dy.map(|g| g * c))],
            Op::Relu(x) => vec![(*x, zip(dy, self.value(*x), |g, v| if v > 0.0 { g } else { 0.0 }))],
            Op::LeakyRelu(x, slope) => {
                vec![(*x, zip(dy, self.value(*x), |g, v| if v > 0.0 { g } else { slope * g }))]
            }
            Op::Elu(x) => {
                let xv = self.value(*x);
                let data = dy
                    .data()
                    .iter()
                    .zip(xv.data())
                    .zip(y.data())
                    .map(|((g, v), out)| if *v > 0.0 { *g } else { g * (out + 1.0) })
                    .collect();
                vec![(*x, Tensor::from_vec(dy.rows(), dy.cols(), data).expect("shape"))]
            }
            Op::Sigmoid(x) => vec![(*x, zip(dy, y, |g, s| g * s * (1.0 - s)))],
            Op::Tanh(x) => vec![(*x, zip(dy, y, |g, t| g * (1.0 - t * t)))],
            Op::ConcatCols(parts) => {
                let mut at = 0;
                let mut out = Vec::with_capacity(parts.len());
                for p in parts {
                    let cols = self.value(*p).cols();
                    let mut g = Tensor::zeros(dy.rows(), cols);
                    for r in 0..dy.rows() {
                        g.row_slice_mut(r).copy_from_slice(&dy.row_slice(r)[at..at + cols]);
                    }
                    at += cols;
                    out.push((*p, g));
                }
                out
            }
            Op::SliceCols(x, start) => {
                let xv = self.value(*x);
                let mut g = Tensor::zeros(xv.rows(), xv.cols());
                for r in 0..dy.rows() {
                    g.row_slice_mut(r)[*start..*start + dy.cols()].copy_from_slice(dy.row_slice(r));
                }
                vec![(*x, g)]
            }
            Op::SliceRows(x, start) => {
                let xv = self.value(*x);
                let mut g = Tensor::zeros(xv.rows(), xv.cols());
                let c = xv.cols();
                g.data_mut()[start * c..(start + dy.rows()) * c].copy_from_slice(dy.data());
                vec![(*x, g)]
            }
            Op::SoftmaxRows(x) => {
                let mut g = Tensor::zeros(dy.rows(), dy.cols());
                for r in 0..dy.rows() {
                    let (yr, dr) = (y.row_slice(r), dy.row_slice(r));
                    let dot: f64 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
                    for ((o, yv), dv) in g.row_slice_mut(r).iter_mut().zip(yr).zip(dr) {
                        *o = yv * (dv - dot);
                    }
                }
                vec![(*x, g)]
            }
            Op::LogSoftmaxRows(x) => {
                let mut g = Tensor::zeros(dy.rows(), dy.cols());
                for r in 0..dy.rows() {
                    let (yr, dr) = (y.row_slice(r), dy.row_slice(r));
                    let total: f64 = dr.iter().sum();
                    for ((o, yv), dv) in g.row_slice_mut(r).iter_mut().zip(yr).zip(dr) {
                        *o = dv - yv.exp() * total;
                    }
                }
                vec![(*x, g)]
            }
            Op::GatherRows(x, index) => {
                let xv = self.value(*x);
                let mut g = Tensor::zeros(xv.rows(), xv.cols());
                for (r, &i) in index.iter().enumerate() {
                    for (o, d) in g.row_slice_mut(i).iter_mut().zip(dy.row_slice(r)) {
                        *o += d;
                    }
                }
                vec![(*x, g)]
            }
            Op::ScatterAddRows(x, index) => {
                let mut g = Tensor::zeros(index.len(), dy.cols());
                for (r, &i) in index.iter().enumerate() {
                    g.row_slice_mut(r).copy_from_slice(dy.row_slice(i));
                }
                vec![(*x, g)]
            }
            Op::SegmentSoftmax(x, segments) => {
                let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; n_seg];
                for ((&s, yv), dv) in segments.iter().zip(y.data()).zip(dy.data()) {
                    dot[s] += yv * dv;
                }
                let data = segments
                    .iter()
                    .zip(y.data())
                    .zip(dy.data())
                    .map(|((&s, yv), dv)| yv * (dv - dot[s]))
                    .collect();
                vec![(*x, Tensor::from_vec(segments.len(), 1, data).expect("shape"))]
            }
            Op::MulColumn(x, s) => {
                let (xv, sv) = (self.value(*x), self.value(*s));
                let mut gx = dy.clone();
                let mut gs = Tensor::zeros(sv.rows(), 1);
                for r in 0..dy.rows() {
                    let k = sv.data()[r];
                    gx.row_slice_mut(r).iter_mut().for_each(|v| *v *= k);
                    gs.data_mut()[r] = dy.row_slice(r).iter().zip(xv.row_slice(r)).map(|(a, b)| a * b).sum();
                }
                vec![(*x, gx), (*s, gs)]
            }
            Op::DivColumn(x, s) => {
                let (xv, sv) = (self.value(*x), self.value(*s));
                let mut gx = dy.clone();
                let mut gs = Tensor::zeros(sv.rows(), 1);
                for r in 0..dy.rows() {
                    let k = sv.data()[r];
                    gx.row_slice_mut(r).iter_mut().for_each(|v| *v /= k);
                    let dot: f64 = dy.row_slice(r).iter().zip(xv.row_slice(r)).map(|(a, b)| a * b).sum();
                    gs.data_mut()[r] = -dot / (k * k);
                }
                vec![(*x, gx), (*s, gs)]
            }
            Op::PickCols(x, index) => {
                let xv = self.value(*x);
                let mut g = Tensor::zeros(xv.rows(), xv.cols());
                for (r, &c) in index.iter().enumerate() {
                    g.set(r, c, dy.data()[r]);
                }
                vec![(*x, g)]
            }
            Op::StraightThrough(soft) => vec![(*soft, dy.clone())],
            Op::Square(x) => vec![(*x, zip(dy, self.value(*x), |g, v| 2.0 * g * v))],
            Op::Mean(x) => {
                let xv = self.value(*x);
                let g = dy.data()[0] / xv.len() as f64;
                vec![(*x, Tensor::filled(xv.rows(), xv.cols(), g))]
            }
            Op::Sum(x) => {
                let xv = self.value(*x);
                vec![(*x, Tensor::filled(xv.rows(), xv.cols(), dy.data()[0]))]
            }
        }
    }
}

fn inputs(op: &Op) -> Vec<Var> {
    match op {
        Op::Constant | Op::Param(_) => Vec::new(),
        Op::MatMul(a, b)
        | Op::AddBias(a, b)
        | Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::MulColumn(a, b)
        | Op::DivColumn(a, b) => vec![*a, *b],
        Op::ConcatCols(parts) => parts.clone(),
        Op::Scale(x, _)
        | Op::Relu(x)
        | Op::LeakyRelu(x, _)
        | Op::Elu(x)
        | Op::Sigmoid(x)
        | Op::Tanh(x)
        | Op::SliceCols(x, _)
        | Op::SliceRows(x, _)
        | Op::SoftmaxRows(x)
        | Op::LogSoftmaxRows(x)
        | Op::GatherRows(x, _)
        | Op::ScatterAddRows(x, _)
        | Op::SegmentSoftmax(x, _)
        | Op::PickCols(x, _)
        | Op::StraightThrough(x)
        | Op::Square(x)
        | Op::Mean(x)
        | Op::Sum(x) => vec![*x],
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("operands share a shape")
}

#[inline]
pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of one row, in place.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[(&str, Tensor)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (n, v) in values {
            s.register(*n, v.clone()).unwrap();
        }
        s
    }

    #[test]
    fn sum_of_params_has_unit_gradient() {
        let store = store_with(&[("a", Tensor::row(&[1.0, -2.0, 3.0])), ("b", Tensor::scalar(4.0))]);
        let mut tape = Tape::new(&store);
        let a = tape.param_named("a").unwrap();
        let b = tape.param_named("b").unwrap();
        let sa = tape.sum(a).unwrap();
        let loss = tape.add(sa, b).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(store.id("a").unwrap()).unwrap().data(), &[1.0, 1.0, 1.0]);
        assert_eq!(g.get(store.id("b").unwrap()).unwrap().data(), &[1.0]);
    }

    #[test]
    fn constant_loss_gives_no_gradient() {
        let store = store_with(&[("a", Tensor::row(&[1.0, 2.0]))]);
        let mut tape = Tape::new(&store);
        let _ = tape.param_named("a").unwrap();
        let c = tape.constant(Tensor::scalar(3.0));
        let g = tape.backward(c).unwrap();
        assert!(g.get(store.id("a").unwrap()).is_none());
    }

    #[test]
    fn backward_errors() {
        let store = store_with(&[("a", Tensor::row(&[1.0, 2.0]))]);
        let mut tape = Tape::new(&store);
        let a = tape.param_named("a").unwrap();
        assert!(matches!(tape.backward(a), Err(NnError::NotScalar(_))));
        let s = tape.sum(a).unwrap();
        tape.backward(s).unwrap();
        assert!(matches!(tape.backward(s), Err(NnError::TapeConsumed)));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, -500.0, 0.0, 700.0]).unwrap());
        let y = tape.softmax_rows(x).unwrap();
        for r in 0..2 {
            let s: f64 = tape.value(y).row_slice(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_softmax_normalises_each_segment() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::from_vec(5, 1, vec![0.3, -1.0, 2.0, 0.0, 5.0]).unwrap());
        let y = tape.segment_softmax(x, &[0, 1, 0, 1, 2]).unwrap();
        let v = tape.value(y).data();
        assert!((v[0] + v[2] - 1.0).abs() < 1e-12);
        assert!((v[1] + v[3] - 1.0).abs() < 1e-12);
        assert!((v[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::row(&[1.0, 1.0]));
        let zero = tape.constant(Tensor::scalar(0.0));
        assert!(matches!(tape.div_column(x, zero), Err(NnError::NonFinite(_))));
    }
}
