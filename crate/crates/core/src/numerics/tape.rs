//! Reverse-mode differentiation over a linear tape of matrix primitives.
//!
//! Nodes are appended in evaluation order, so the tape is already a
//! topological order and `backward` walks it once from the end.

use std::sync::Arc;

use super::ops::{self, gelu, gelu_derivative, sigmoid};
use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Lower and upper clamp applied to scores before the log in [`Tape::bce`].
pub const BCE_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    OneMinus(Var),
    Gelu(Var),
    Sigmoid(Var),
    GatherRows(Var, Arc<[usize]>),
    ScatterAddRows(Var, Arc<[usize]>),
    RowDot(Var, Var),
    MulColumn(Var, Var),
    SegmentSoftmax(Var, Arc<[usize]>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Conv1d { input: Var, kernel: Var, bias: Var },
    SelectRows(Arc<[bool]>, Var, Var),
    Bce(Var, Arc<[f64]>),
    Sum(Var),
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn param(&mut self, params: &ParamStore, id: ParamId) -> Var {
        self.push(params.get(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// Adds a `1 × cols` bias to every row.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::Shape(format!(
                "bias {:?} for input {:?}",
                bv.shape(),
                xv.shape()
            )));
        }
        let mut out = xv.clone();
        let cols = out.cols();
        for row in out.data_mut().chunks_mut(cols.max(1)) {
            for (o, b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let ng = self.needs(x) || self.needs(bias);
        Ok(self.push(out, Op::AddBias(x, bias), ng))
    }

    /// `x · weight + bias`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let xw = self.matmul(x, weight)?;
        self.add_bias(xw, bias)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(Error::Shape(format!(
                "add {:?} and {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|v| v * factor);
        let ng = self.needs(a);
        self.push(out, Op::Scale(a, factor), ng)
    }

    /// Multiplies every entry of `a` by the `1 × 1` value `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let factor = self.value(s).item()?;
        let out = self.value(a).map(|v| v * factor);
        let ng = self.needs(a) || self.needs(s);
        Ok(self.push(out, Op::ScaleBy(a, s), ng))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| 1.0 - v);
        let ng = self.needs(a);
        self.push(out, Op::OneMinus(a), ng)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(gelu);
        let ng = self.needs(a);
        self.push(out, Op::Gelu(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let ng = self.needs(a);
        self.push(out, Op::Sigmoid(a), ng)
    }

    /// `out[i] = a[index[i]]`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var> {
        let av = self.value(a);
        let cols = av.cols();
        let mut data = Vec::with_capacity(index.len() * cols);
        for &r in index.iter() {
            if r >= av.rows() {
                return Err(Error::Shape(format!("gather row {r} of {}", av.rows())));
            }
            data.extend_from_slice(av.row_slice(r));
        }
        let out = Tensor::new(index.len(), cols, data)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::GatherRows(a, index), ng))
    }

    /// `out[index[i]] += a[i]`, producing `rows` output rows.
    pub fn scatter_add_rows(&mut self, a: Var, index: Arc<[usize]>, rows: usize) -> Result<Var> {
        let av = self.value(a);
        if av.rows() != index.len() {
            return Err(Error::Shape(format!(
                "scatter {} rows with {} indices",
                av.rows(),
                index.len()
            )));
        }
        let cols = av.cols();
        let mut out = Tensor::zeros(rows, cols);
        for (i, &r) in index.iter().enumerate() {
            if r >= rows {
                return Err(Error::Shape(format!("scatter to row {r} of {rows}")));
            }
            let dst = &mut out.data_mut()[r * cols..(r + 1) * cols];
            for (o, v) in dst.iter_mut().zip(av.row_slice(i)) {
                *o += v;
            }
        }
        let ng = self.needs(a);
        Ok(self.push(out, Op::ScatterAddRows(a, index), ng))
    }

    /// Row-wise inner product, an `n × 1` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(Error::Shape(format!(
                "row_dot {:?} and {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let values = (0..av.rows())
            .map(|r| {
                av.row_slice(r)
                    .iter()
                    .zip(bv.row_slice(r))
                    .map(|(x, y)| x * y)
                    .sum()
            })
            .collect();
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::column(values), Op::RowDot(a, b), ng))
    }

    /// Scales row `i` of `a` by `column[i]`.
    pub fn mul_column(&mut self, a: Var, column: Var) -> Result<Var> {
        let (av, cv) = (self.value(a), self.value(column));
        if cv.cols() != 1 || cv.rows() != av.rows() {
            return Err(Error::Shape(format!(
                "mul_column {:?} by {:?}",
                av.shape(),
                cv.shape()
            )));
        }
        let mut out = av.clone();
        let cols = out.cols();
        if cols > 0 {
            for (row, c) in out.data_mut().chunks_mut(cols).zip(cv.data()) {
                for v in row {
                    *v *= c;
                }
            }
        }
        let ng = self.needs(a) || self.needs(column);
        Ok(self.push(out, Op::MulColumn(a, column), ng))
    }

    /// Softmax of an `n × 1` column within runs of equal (sorted) segment ids.
    pub fn segment_softmax(&mut self, a: Var, segments: Arc<[usize]>) -> Result<Var> {
        let av = self.value(a);
        if av.cols() != 1 {
            return Err(Error::Shape(format!("segment_softmax on {:?}", av.shape())));
        }
        ops::validate_segments(av.rows(), &segments)?;
        let mut out = vec![0.0; av.rows()];
        ops::segmented_softmax_into(av.data(), &segments, &mut out);
        let ng = self.needs(a);
        Ok(self.push(Tensor::column(out), Op::SegmentSoftmax(a, segments), ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows())
            .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::Shape("concat_cols row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            Tensor::new(rows, cols, data)?,
            Op::ConcatCols(parts.to_vec()),
            ng,
        ))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let av = self.value(a);
        if start > end || end > av.cols() {
            return Err(Error::Shape(format!(
                "slice {start}..{end} of {} columns",
                av.cols()
            )));
        }
        let mut data = Vec::with_capacity(av.rows() * (end - start));
        for r in 0..av.rows() {
            data.extend_from_slice(&av.row_slice(r)[start..end]);
        }
        let out = Tensor::new(av.rows(), end - start, data)?;
        let ng = self.needs(a);
        Ok(self.push(out, Op::SliceCols(a, start), ng))
    }

    /// Single-filter valid convolution applied to every row of `input`.
    ///
    /// Each row of `input` is a flattened `l × c` sequence matrix, `kernel`
    /// is `k × c` and `bias` is `1 × 1`. The output is `rows × (l − k + 1)`.
    pub fn conv1d(&mut self, input: Var, kernel: Var, bias: Var) -> Result<Var> {
        let (xv, kv) = (self.value(input), self.value(kernel));
        let b = self.value(bias).item()?;
        let (k, c) = (kv.rows(), kv.cols());
        if c == 0 || xv.cols() % c != 0 {
            return Err(Error::Shape(format!(
                "input width {} is not a multiple of {c} channels",
                xv.cols()
            )));
        }
        let l = xv.cols() / c;
        if l < k {
            return Err(Error::Shape(format!(
                "sequence length {l} shorter than kernel height {k}"
            )));
        }
        let width = l - k + 1;
        let mut data = Vec::with_capacity(xv.rows() * width);
        for r in 0..xv.rows() {
            data.extend(ops::conv1d_flat(xv.row_slice(r), kv.data(), k, c, b));
        }
        let out = Tensor::new(xv.rows(), width, data)?;
        let ng = self.needs(input) || self.needs(kernel) || self.needs(bias);
        Ok(self.push(
            out,
            Op::Conv1d {
                input,
                kernel,
                bias,
            },
            ng,
        ))
    }

    /// Row `i` from `a` where `mask[i]`, else from `b`.
    pub fn select_rows(&mut self, mask: Arc<[bool]>, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) || mask.len() != av.rows() {
            return Err(Error::Shape("select_rows operands disagree".into()));
        }
        let mut out = bv.clone();
        let cols = out.cols();
        for (r, &m) in mask.iter().enumerate() {
            if m {
                out.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(av.row_slice(r));
            }
        }
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::SelectRows(mask, a, b), ng))
    }

    /// Summed binary cross entropy of an `n × 1` score column.
    pub fn bce(&mut self, scores: Var, labels: Arc<[f64]>) -> Result<Var> {
        let sv = self.value(scores);
        if sv.cols() != 1 || sv.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "bce scores {:?} with {} labels",
                sv.shape(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
            return Err(Error::Invalid(format!("label {bad} is not 0 or 1")));
        }
        let loss = bce_value(sv.data(), &labels);
        let ng = self.needs(scores);
        Ok(self.push(Tensor::scalar(loss), Op::Bce(scores, labels), ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).sum();
        let ng = self.needs(a);
        self.push(Tensor::scalar(total), Op::Sum(a), ng)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(Error::Shape(format!(
                "mul {:?} and {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(av.rows(), av.cols(), data)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    /// Gradients of the scalar `loss` with respect to every parameter leaf.
    pub fn backward(&self, loss: Var, params: &ParamStore) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                lv.shape()
            )));
        }
        let mut out = Gradients::zeros_like(params);
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    if id.0 >= out.len() {
                        return Err(Error::Invalid(format!(
                            "tape references parameter {} outside the store",
                            id.0
                        )));
                    }
                    out.get_mut(*id).add_assign(&g);
                }
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let bt = self.value(*b).transpose();
                        self.accumulate(&mut grads, *a, g.matmul(&bt)?);
                    }
                    if self.needs(*b) {
                        let at = self.value(*a).transpose();
                        self.accumulate(&mut grads, *b, at.matmul(&g)?);
                    }
                }
                Op::AddBias(x, b) => {
                    if self.needs(*b) {
                        let cols = g.cols();
                        let mut db = Tensor::zeros(1, cols);
                        for r in 0..g.rows() {
                            for (d, v) in db.data_mut().iter_mut().zip(g.row_slice(r)) {
                                *d += v;
                            }
                        }
                        self.accumulate(&mut grads, *b, db);
                    }
                    if self.needs(*x) {
                        self.accumulate(&mut grads, *x, g);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*a) {
                        self.accumulate(&mut grads, *a, g.clone());
                    }
                    if self.needs(*b) {
                        self.accumulate(&mut grads, *b, g);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let prod = |other: &Tensor| {
                        let mut d = g.clone();
                        for (dv, o) in d.data_mut().iter_mut().zip(other.data()) {
                            *dv *= o;
                        }
                        d
                    };
                    if self.needs(*a) {
                        let da = prod(bv);
                        self.accumulate(&mut grads, *a, da);
                    }
                    if self.needs(*b) {
                        let db = prod(av);
                        self.accumulate(&mut grads, *b, db);
                    }
                }
                Op::Scale(a, f) => {
                    let f = *f;
                    self.accumulate(&mut grads, *a, g.map(|v| v * f));
                }
                Op::ScaleBy(a, s) => {
                    let factor = self.value(*s).data()[0];
                    if self.needs(*s) {
                        let ds: f64 = g
                            .data()
                            .iter()
                            .zip(self.value(*a).data())
                            .map(|(x, y)| x * y)
                            .sum();
                        self.accumulate(&mut grads, *s, Tensor::scalar(ds));
                    }
                    if self.needs(*a) {
                        self.accumulate(&mut grads, *a, g.map(|v| v * factor));
                    }
                }
                Op::OneMinus(a) => self.accumulate(&mut grads, *a, g.map(|v| -v)),
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let mut d = g;
                    for (dv, &xv) in d.data_mut().iter_mut().zip(x.data()) {
                        *dv *= gelu_derivative(xv);
                    }
                    self.accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let mut d = g;
                    for (dv, &y) in d.data_mut().iter_mut().zip(node.value.data()) {
                        *dv *= y * (1.0 - y);
                    }
                    self.accumulate(&mut grads, *a, d);
                }
                Op::GatherRows(a, index) => {
                    let av = self.value(*a);
                    let cols = av.cols();
                    let mut d = Tensor::zeros(av.rows(), cols);
                    for (i, &r) in index.iter().enumerate() {
                        let dst = &mut d.data_mut()[r * cols..(r + 1) * cols];
                        for (o, v) in dst.iter_mut().zip(g.row_slice(i)) {
                            *o += v;
                        }
                    }
                    self.accumulate(&mut grads, *a, d);
                }
                Op::ScatterAddRows(a, index) => {
                    let cols = g.cols();
                    let mut data = Vec::with_capacity(index.len() * cols);
                    for &r in index.iter() {
                        data.extend_from_slice(g.row_slice(r));
                    }
                    self.accumulate(&mut grads, *a, Tensor::new(index.len(), cols, data)?);
                }
                Op::RowDot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let scale_rows = |src: &Tensor| {
                        let mut d = src.clone();
                        let cols = d.cols();
                        if cols > 0 {
                            for (row, gv) in d.data_mut().chunks_mut(cols).zip(g.data()) {
                                for v in row {
                                    *v *= gv;
                                }
                            }
                        }
                        d
                    };
                    if self.needs(*a) {
                        let da = scale_rows(bv);
                        self.accumulate(&mut grads, *a, da);
                    }
                    if self.needs(*b) {
                        let db = scale_rows(av);
                        self.accumulate(&mut grads, *b, db);
                    }
                }
                Op::MulColumn(a, c) => {
                    let (av, cv) = (self.value(*a), self.value(*c));
                    if self.needs(*c) {
                        let dc = (0..av.rows())
                            .map(|r| {
                                g.row_slice(r)
                                    .iter()
                                    .zip(av.row_slice(r))
                                    .map(|(x, y)| x * y)
                                    .sum()
                            })
                            .collect();
                        self.accumulate(&mut grads, *c, Tensor::column(dc));
                    }
                    if self.needs(*a) {
                        let mut d = g;
                        let cols = d.cols();
                        if cols > 0 {
                            for (row, s) in d.data_mut().chunks_mut(cols).zip(cv.data()) {
                                for v in row {
                                    *v *= s;
                                }
                            }
                        }
                        self.accumulate(&mut grads, *a, d);
                    }
                }
                Op::SegmentSoftmax(a, segments) => {
                    let y = node.value.data();
                    let gy = g.data();
                    let mut d = vec![0.0; y.len()];
                    let mut start = 0;
                    while start < y.len() {
                        let mut end = start + 1;
                        while end < y.len() && segments[end] == segments[start] {
                            end += 1;
                        }
                        let dot: f64 = (start..end).map(|i| y[i] * gy[i]).sum();
                        for i in start..end {
                            d[i] = y[i] * (gy[i] - dot);
                        }
                        start = end;
                    }
                    self.accumulate(&mut grads, *a, Tensor::column(d));
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pc = self.value(p).cols();
                        if self.needs(p) {
                            let mut data = Vec::with_capacity(g.rows() * pc);
                            for r in 0..g.rows() {
                                data.extend_from_slice(&g.row_slice(r)[offset..offset + pc]);
                            }
                            self.accumulate(&mut grads, p, Tensor::new(g.rows(), pc, data)?);
                        }
                        offset += pc;
                    }
                }
                Op::SliceCols(a, start) => {
                    let av = self.value(*a);
                    let mut d = Tensor::zeros(av.rows(), av.cols());
                    let w = g.cols();
                    for r in 0..g.rows() {
                        let base = r * av.cols() + start;
                        d.data_mut()[base..base + w].copy_from_slice(g.row_slice(r));
                    }
                    self.accumulate(&mut grads, *a, d);
                }
                Op::Conv1d {
                    input,
                    kernel,
                    bias,
                } => {
                    let (xv, kv) = (self.value(*input), self.value(*kernel));
                    let (k, c) = (kv.rows(), kv.cols());
                    let width = g.cols();
                    if self.needs(*bias) {
                        self.accumulate(&mut grads, *bias, Tensor::scalar(g.sum()));
                    }
                    if self.needs(*kernel) {
                        let mut dk = Tensor::zeros(k, c);
                        for r in 0..xv.rows() {
                            let x = xv.row_slice(r);
                            for (i, &gv) in g.row_slice(r).iter().enumerate() {
                                if gv == 0.0 {
                                    continue;
                                }
                                let window = &x[i * c..i * c + k * c];
                                for (d, w) in dk.data_mut().iter_mut().zip(window) {
                                    *d += gv * w;
                                }
                            }
                        }
                        self.accumulate(&mut grads, *kernel, dk);
                    }
                    if self.needs(*input) {
                        let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                        for r in 0..xv.rows() {
                            for i in 0..width {
                                let gv = g.get(r, i);
                                let base = r * xv.cols() + i * c;
                                for (j, kvv) in kv.data().iter().enumerate() {
                                    dx.data_mut()[base + j] += gv * kvv;
                                }
                            }
                        }
                        self.accumulate(&mut grads, *input, dx);
                    }
                }
                Op::SelectRows(mask, a, b) => {
                    let cols = g.cols();
                    let mut da = Tensor::zeros(g.rows(), cols);
                    let mut db = Tensor::zeros(g.rows(), cols);
                    for (r, &m) in mask.iter().enumerate() {
                        let dst = if m { &mut da } else { &mut db };
                        dst.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(g.row_slice(r));
                    }
                    if self.needs(*a) {
                        self.accumulate(&mut grads, *a, da);
                    }
                    if self.needs(*b) {
                        self.accumulate(&mut grads, *b, db);
                    }
                }
                Op::Bce(scores, labels) => {
                    let upstream = g.data()[0];
                    let d = self
                        .value(*scores)
                        .data()
                        .iter()
                        .zip(labels.iter())
                        .map(|(&y, &t)| upstream * bce_derivative(y, t))
                        .collect();
                    self.accumulate(&mut grads, *scores, Tensor::column(d));
                }
                Op::Sum(a) => {
                    let av = self.value(*a);
                    let up = g.data()[0];
                    self.accumulate(&mut grads, *a, Tensor::filled(av.rows(), av.cols(), up));
                }
            }
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], target: Var, delta: Tensor) {
        if !self.needs(target) {
            return;
        }
        match &mut grads[target.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }
}

fn clamp_score(y: f64) -> f64 {
    y.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

/// `−Σ [t·ln y + (1 − t)·ln(1 − y)]` with scores clamped away from 0 and 1.
pub fn bce_value(scores: &[f64], labels: &[f64]) -> f64 {
    -scores
        .iter()
        .zip(labels)
        .map(|(&y, &t)| {
            let c = clamp_score(y);
            t * c.ln() + (1.0 - t) * (1.0 - c).ln()
        })
        .sum::<f64>()
}

/// Per-element losses whose sum is [`bce_value`] up to rounding.
pub fn bce_terms(scores: &[f64], labels: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .zip(labels)
        .map(|(&y, &t)| {
            let c = clamp_score(y);
            -(t * c.ln() + (1.0 - t) * (1.0 - c).ln())
        })
        .collect()
}

fn bce_derivative(y: f64, t: f64) -> f64 {
    if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&y) {
        return 0.0;
    }
    -(t / y - (1.0 - t) / (1.0 - y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let mut params = ParamStore::new();
        let w = params.insert("w", Tensor::column(vec![1.0, 2.0])).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&params, w);
        let sq = tape.mul(wv, wv).unwrap();
        let loss = tape.sum(sq);
        let grads = tape.backward(loss, &params).unwrap();
        assert_eq!(grads.get(w).data(), &[2.0, 4.0]);
    }

    #[test]
    fn detached_parameter_gets_zero() {
        let mut params = ParamStore::new();
        let used = params.insert("used", Tensor::scalar(3.0)).unwrap();
        let unused = params.insert("unused", Tensor::filled(2, 2, 5.0)).unwrap();
        let mut tape = Tape::new();
        let u = tape.param(&params, used);
        let _ = tape.param(&params, unused);
        let loss = tape.scale(u, 2.0);
        let grads = tape.backward(loss, &params).unwrap();
        assert_eq!(grads.get(used).data(), &[2.0]);
        assert_eq!(grads.get(unused), &Tensor::zeros(2, 2));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let params = ParamStore::new();
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::zeros(2, 1));
        assert!(tape.backward(c, &params).is_err());
    }

    #[test]
    fn bce_half_is_ln2() {
        for label in [0.0, 1.0] {
            assert!((bce_value(&[0.5], &[label]) - std::f64::consts::LN_2).abs() < 1e-15);
        }
        assert!(bce_value(&[1.0, 0.0], &[1.0, 0.0]) < 1e-11);
    }

    #[test]
    fn bce_rejects_bad_labels() {
        let mut tape = Tape::new();
        let s = tape.constant(Tensor::column(vec![0.3]));
        assert!(tape.bce(s, Arc::from(vec![0.5])).is_err());
    }

    #[test]
    fn bce_score_gradient_matches_differences() {
        let scores = [0.13, 0.5, 0.92, 0.61];
        let labels: Arc<[f64]> = Arc::from(vec![1.0, 0.0, 1.0, 0.0]);
        let mut params = ParamStore::new();
        let s = params.insert("s", Tensor::column(scores.to_vec())).unwrap();
        let mut tape = Tape::new();
        let sv = tape.param(&params, s);
        let loss = tape.bce(sv, labels.clone()).unwrap();
        let grads = tape.backward(loss, &params).unwrap();
        let h = 1e-6;
        for i in 0..scores.len() {
            let mut up = scores;
            let mut down = scores;
            up[i] += h;
            down[i] -= h;
            let numeric = (bce_value(&up, &labels) - bce_value(&down, &labels)) / (2.0 * h);
            let analytic = grads.get(s).data()[i];
            assert!(
                (numeric - analytic).abs() < 1e-8 * analytic.abs().max(1.0),
                "i={i} numeric={numeric} analytic={analytic}"
            );
        }
    }
}
