use alloc::vec;
use alloc::vec::Vec;

use super::TensorValue;
use crate::math;
use crate::{Error, Result};

/// Floor applied inside `log` so entropies of collapsed distributions stay finite.
pub const LOG_EPS: f64 = 1e-12;

/// Default negative-side slope of `leaky_relu`.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    MatMul(Var, Var),
    Exp(Var),
    Log(Var),
    Softmax(Var),
    Sigmoid(Var),
    Softplus(Var),
    LeakyRelu(Var, f64),
    Relu(Var),
    Abs(Var),
    Square(Var),
    Affine(Var, f64),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    GatherRows(Var, Vec<usize>),
    SegmentSum(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    Reshape(Var),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: TensorValue,
}

/// Linear record of tensor operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so parents always precede
/// children and [`Tape::backward`] is a single reverse sweep.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
}

fn mismatch(op: &'static str, a: &TensorValue, b: &TensorValue) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
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

    fn push(&mut self, op: Op, value: TensorValue) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<&TensorValue> {
        self.nodes
            .get(v.0)
            .map(|n| &n.value)
            .ok_or(Error::ForeignVar(v.0))
    }

    /// Records a leaf. Constants and parameters are both leaves; parameters
    /// are simply the leaves whose gradient the caller reads back.
    pub fn leaf(&mut self, value: TensorValue) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.leaf(TensorValue::scalar(x))
    }

    pub fn value(&self, v: Var) -> &TensorValue {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` root with respect to `v` (zeros if
    /// `v` was unreachable or `backward` has not run).
    pub fn grad(&self, v: Var) -> Vec<f64> {
        match self.grads.get(v.0) {
            Some(g) if !g.is_empty() => g.clone(),
            _ => vec![0.0; self.nodes[v.0].value.len()],
        }
    }

    fn elementwise(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<TensorValue> {
        let (va, vb) = (self.check(a)?, self.check(b)?);
        let (shape, n) = if va.shape() == vb.shape() || vb.is_scalar() {
            (va.shape().to_vec(), va.len())
        } else if va.is_scalar() {
            (vb.shape().to_vec(), vb.len())
        } else {
            return Err(mismatch(op, va, vb));
        };
        let (da, db) = (va.data(), vb.data());
        let sa = if da.len() == n { 1 } else { 0 };
        let sb = if db.len() == n { 1 } else { 0 };
        let data = (0..n).map(|i| f(da[i * sa], db[i * sb])).collect();
        TensorValue::new(shape, data)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let va = self.check(a)?;
        let data = va.data().iter().map(|&x| f(x)).collect();
        let value = TensorValue::new(va.shape().to_vec(), data)?;
        Ok(self.push(op, value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.elementwise("add", a, b, |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.elementwise("subtract", a, b, |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.elementwise("multiply", a, b, |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.elementwise("divide", a, b, |x, y| x / y)?;
        Ok(self.push(Op::Div(a, b), v))
    }

    /// `[n,k] x [k,m] -> [n,m]` or `[n,k] x [k] -> [n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.check(a)?, self.check(b)?);
        if va.shape().len() != 2 || vb.shape().is_empty() || va.shape()[1] != vb.shape()[0] {
            return Err(mismatch("matmul", va, vb));
        }
        let (n, k) = (va.shape()[0], va.shape()[1]);
        let m = vb.cols();
        let mut out = vec![0.0; n * m];
        let (da, db) = (va.data(), vb.data());
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let x = da[i * k + p];
                if x == 0.0 {
                    continue;
                }
                for (o, &y) in row.iter_mut().zip(&db[p * m..(p + 1) * m]) {
                    *o += x * y;
                }
            }
        }
        let shape = if vb.shape().len() == 1 {
            vec![n]
        } else {
            vec![n, m]
        };
        let value = TensorValue::new(shape, out)?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Exp(a), math::exp)
    }

    /// `ln(max(x, LOG_EPS))`.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Log(a), |x| math::ln(x.max(LOG_EPS)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sigmoid(a), math::sigmoid)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Softplus(a), math::softplus)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, Op::LeakyRelu(a, slope), |x| if x > 0.0 { x } else { slope * x })
    }

    /// Hinge `max(x, 0)`.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Abs(a), f64::abs)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// `scale * x + offset` with constant coefficients.
    pub fn affine(&mut self, a: Var, scale: f64, offset: f64) -> Result<Var> {
        self.unary(a, Op::Affine(a, scale), |x| scale * x + offset)
    }

    pub fn scale(&mut self, a: Var, scale: f64) -> Result<Var> {
        self.affine(a, scale, 0.0)
    }

    /// Softmax along the last axis (each row of a matrix, or the whole vector).
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let va = self.check(a)?;
        let cols = if va.shape().len() == 2 { va.cols() } else { va.len() };
        let mut data = va.data().to_vec();
        if cols > 0 {
            for row in data.chunks_mut(cols) {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for x in row.iter_mut() {
                    *x = math::exp(*x - max);
                    z += *x;
                }
                for x in row.iter_mut() {
                    *x /= z;
                }
            }
        }
        let value = TensorValue::new(va.shape().to_vec(), data)?;
        Ok(self.push(Op::Softmax(a), value))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.check(a)?.data().iter().sum();
        Ok(self.push(Op::Sum(a), TensorValue::scalar(s)))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let va = self.check(a)?;
        if va.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let s = va.data().iter().sum::<f64>() / va.len() as f64;
        Ok(self.push(Op::Mean(a), TensorValue::scalar(s)))
    }

    /// Sum along the last axis of a matrix: `[n,k] -> [n]`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let va = self.check(a)?;
        if va.shape().len() != 2 {
            return Err(mismatch("row_sum", va, va));
        }
        let cols = va.cols();
        let data = if cols == 0 {
            vec![0.0; va.rows()]
        } else {
            va.data().chunks(cols).map(|r| r.iter().sum()).collect()
        };
        Ok(self.push(Op::RowSum(a), TensorValue::vector(data)))
    }

    /// Selects rows (or vector elements) by index; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let va = self.check(a)?;
        if va.shape().is_empty() {
            return Err(mismatch("gather_rows", va, va));
        }
        let (rows, cols) = (va.rows(), va.cols());
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= rows {
                return Err(Error::IndexOutOfRange { index: i, len: rows });
            }
            data.extend_from_slice(va.row(i));
        }
        let shape = if va.shape().len() == 2 {
            vec![indices.len(), cols]
        } else {
            vec![indices.len()]
        };
        let value = TensorValue::new(shape, data)?;
        Ok(self.push(Op::GatherRows(a, indices.to_vec()), value))
    }

    /// Sums consecutive groups of rows; `lengths` must cover every row.
    pub fn segment_sum(&mut self, a: Var, lengths: &[usize]) -> Result<Var> {
        let va = self.check(a)?;
        let total: usize = lengths.iter().sum();
        if va.shape().is_empty() || total != va.rows() {
            return Err(Error::ShapeMismatch {
                op: "segment_sum",
                left: va.shape().to_vec(),
                right: vec![total],
            });
        }
        let cols = va.cols();
        let mut data = vec![0.0; lengths.len() * cols];
        let mut r = 0;
        for (g, &len) in lengths.iter().enumerate() {
            let out = &mut data[g * cols..(g + 1) * cols];
            for _ in 0..len {
                for (o, &x) in out.iter_mut().zip(va.row(r)) {
                    *o += x;
                }
                r += 1;
            }
        }
        let shape = if va.shape().len() == 2 {
            vec![lengths.len(), cols]
        } else {
            vec![lengths.len()]
        };
        let value = TensorValue::new(shape, data)?;
        Ok(self.push(Op::SegmentSum(a, lengths.to_vec()), value))
    }

    /// Stacks matrices (or vectors) with equal trailing width along axis 0.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyBatch)?;
        let rank = self.check(first)?.shape().len();
        let cols = self.check(first)?.cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let vp = self.check(p)?;
            if vp.shape().len() != rank || vp.cols() != cols || rank == 0 {
                return Err(mismatch("concat_rows", self.value(first), vp));
            }
            rows += vp.rows();
            data.extend_from_slice(vp.data());
        }
        let shape = if rank == 2 { vec![rows, cols] } else { vec![rows] };
        let value = TensorValue::new(shape, data)?;
        Ok(self.push(Op::ConcatRows(parts.to_vec()), value))
    }

    /// Columns `start..start+len` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let va = self.check(a)?;
        if va.shape().len() != 2 || start + len > va.cols() {
            return Err(Error::ShapeMismatch {
                op: "slice_cols",
                left: va.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let rows = va.rows();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&va.row(r)[start..start + len]);
        }
        let value = TensorValue::matrix(rows, len, data)?;
        Ok(self.push(Op::SliceCols(a, start), value))
    }

    /// Same data, new shape (element count must match).
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let va = self.check(a)?;
        let value = TensorValue::new(shape.to_vec(), va.data().to_vec()).map_err(|_| Error::ShapeMismatch {
            op: "reshape",
            left: va.shape().to_vec(),
            right: shape.to_vec(),
        })?;
        Ok(self.push(Op::Reshape(a), value))
    }

    /// Elementwise `max(a, b)`, recorded as `b + relu(a - b)`.
    pub fn maximum(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let r = self.relu(d)?;
        self.add(b, r)
    }

    /// Reverse sweep from a scalar root. Gradients of earlier sweeps are discarded.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let rv = self.check(root)?;
        if !rv.is_scalar() {
            return Err(Error::NonScalarRoot(rv.shape().to_vec()));
        }
        self.grads.clear();
        self.grads.resize(self.nodes.len(), Vec::new());
        self.grads[root.0] = vec![1.0];
        for i in (0..=root.0).rev() {
            if self.grads[i].is_empty() {
                continue;
            }
            let g = core::mem::take(&mut self.grads[i]);
            self.propagate(i, &g);
            self.grads[i] = g;
        }
        Ok(())
    }

    fn acc(&mut self, v: Var) -> &mut Vec<f64> {
        let n = self.nodes[v.0].value.len();
        let g = &mut self.grads[v.0];
        if g.is_empty() {
            g.resize(n, 0.0);
        }
        g
    }

    /// Adds `g` into `v`'s accumulator, reducing to a scalar when `v` was broadcast.
    fn acc_broadcast(&mut self, v: Var, g: &[f64], f: impl Fn(usize, f64) -> f64) {
        let target = self.acc(v);
        if target.len() == g.len() {
            for (i, (t, &gi)) in target.iter_mut().zip(g).enumerate() {
                *t += f(i, gi);
            }
        } else {
            target[0] += g.iter().enumerate().map(|(i, &gi)| f(i, gi)).sum::<f64>();
        }
    }

    fn elem(&self, v: Var, i: usize) -> f64 {
        let d = self.nodes[v.0].value.data();
        if d.len() == 1 {
            d[0]
        } else {
            d[i]
        }
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.acc_broadcast(a, g, |_, gi| gi);
                self.acc_broadcast(b, g, |_, gi| gi);
            }
            Op::Sub(a, b) => {
                self.acc_broadcast(a, g, |_, gi| gi);
                self.acc_broadcast(b, g, |_, gi| -gi);
            }
            Op::Mul(a, b) => {
                let bv: Vec<f64> = (0..g.len()).map(|k| self.elem(b, k)).collect();
                let av: Vec<f64> = (0..g.len()).map(|k| self.elem(a, k)).collect();
                self.acc_broadcast(a, g, |k, gi| gi * bv[k]);
                self.acc_broadcast(b, g, |k, gi| gi * av[k]);
            }
            Op::Div(a, b) => {
                let bv: Vec<f64> = (0..g.len()).map(|k| self.elem(b, k)).collect();
                let av: Vec<f64> = (0..g.len()).map(|k| self.elem(a, k)).collect();
                self.acc_broadcast(a, g, |k, gi| gi / bv[k]);
                self.acc_broadcast(b, g, |k, gi| -gi * av[k] / (bv[k] * bv[k]));
            }
            Op::MatMul(a, b) => {
                let va = self.nodes[a.0].value.clone();
                let vb = self.nodes[b.0].value.clone();
                let (n, k) = (va.shape()[0], va.shape()[1]);
                let m = vb.cols();
                // dA = G B^T
                {
                    let ga = self.acc(a);
                    for r in 0..n {
                        for p in 0..k {
                            let brow = &vb.data()[p * m..(p + 1) * m];
                            let grow = &g[r * m..(r + 1) * m];
                            ga[r * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                }
                // dB = A^T G
                let gb = self.acc(b);
                for r in 0..n {
                    let grow = &g[r * m..(r + 1) * m];
                    for p in 0..k {
                        let x = va.data()[r * k + p];
                        if x == 0.0 {
                            continue;
                        }
                        for (t, &gi) in gb[p * m..(p + 1) * m].iter_mut().zip(grow) {
                            *t += x * gi;
                        }
                    }
                }
            }
            Op::Exp(a) => {
                let out = self.nodes[i].value.data().to_vec();
                self.acc_broadcast(a, g, |k, gi| gi * out[k]);
            }
            Op::Log(a) => {
                let x = self.nodes[a.0].value.data().to_vec();
                self.acc_broadcast(a, g, |k, gi| if x[k] > LOG_EPS { gi / x[k] } else { 0.0 });
            }
            Op::Sigmoid(a) => {
                let out = self.nodes[i].value.data().to_vec();
                self.acc_broadcast(a, g, |k, gi| gi * out[k] * (1.0 - out[k]));
            }
            Op::Softplus(a) => {
                let x = self.nodes[a.0].value.data().to_vec();
                self.acc_broadcast(a, g, |k, gi| gi * math::sigmoid(x[k]));
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.nodes[a.0].value.data().to_vec();
                self.acc_broadcast(a, g, |k, gi| if x[k] > 0.0 { gi } else { slope * gi });
            }
            Op::Relu(a) => {
                let x = self.nodes[a.0].value.data().to_vec();
                self.acc_broadcast(a, g, |k, gi| if x[k] > 0.0 { gi } else { 0.0 });
            }
            Op::Abs(a) => {
                let x = self.nodes[a.0].value.data().to_vec();
                self.acc_broadcast(a, g, |k, gi| {
                    if x[k] > 0.0 {
                        gi
                    } else if x[k] < 0.0 {
                        -gi
                    } else {
                        0.0
                    }
                });
            }
            Op::Square(a) => {
                let x = self.nodes[a.0].value.data().to_vec();
                self.acc_broadcast(a, g, |k, gi| 2.0 * x[k] * gi);
            }
            Op::Reshape(a) => {
                for (t, &gi) in self.acc(a).iter_mut().zip(g) {
                    *t += gi;
                }
            }
            Op::Affine(a, scale) => {
                self.acc_broadcast(a, g, |_, gi| scale * gi);
            }
            Op::Softmax(a) => {
                let out = self.nodes[i].value.clone();
                let cols = if out.shape().len() == 2 { out.cols() } else { out.len() };
                let ga = self.acc(a);
                if cols > 0 {
                    for (r, (p, gr)) in out.data().chunks(cols).zip(g.chunks(cols)).enumerate() {
                        let dot: f64 = p.iter().zip(gr).map(|(x, y)| x * y).sum();
                        for j in 0..cols {
                            ga[r * cols + j] += p[j] * (gr[j] - dot);
                        }
                    }
                }
            }
            Op::Sum(a) => {
                let gi = g[0];
                for t in self.acc(a).iter_mut() {
                    *t += gi;
                }
            }
            Op::Mean(a) => {
                let ga = self.acc(a);
                let gi = g[0] / ga.len() as f64;
                for t in ga.iter_mut() {
                    *t += gi;
                }
            }
            Op::RowSum(a) => {
                let cols = self.nodes[a.0].value.cols();
                let ga = self.acc(a);
                for (r, &gi) in g.iter().enumerate() {
                    for t in &mut ga[r * cols..(r + 1) * cols] {
                        *t += gi;
                    }
                }
            }
            Op::GatherRows(a, idx) => {
                let cols = self.nodes[a.0].value.cols();
                let ga = self.acc(a);
                for (r, &src) in idx.iter().enumerate() {
                    for c in 0..cols {
                        ga[src * cols + c] += g[r * cols + c];
                    }
                }
            }
            Op::SegmentSum(a, lengths) => {
                let cols = self.nodes[a.0].value.cols();
                let ga = self.acc(a);
                let mut r = 0;
                for (s, &len) in lengths.iter().enumerate() {
                    for _ in 0..len {
                        for c in 0..cols {
                            ga[r * cols + c] += g[s * cols + c];
                        }
                        r += 1;
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.nodes[p.0].value.len();
                    let slice = &g[offset..offset + n];
                    for (t, &gi) in self.acc(p).iter_mut().zip(slice) {
                        *t += gi;
                    }
                    offset += n;
                }
            }
            Op::SliceCols(a, start) => {
                let cols = self.nodes[a.0].value.cols();
                let width = self.nodes[i].value.cols();
                let ga = self.acc(a);
                for (r, gr) in g.chunks(width.max(1)).enumerate() {
                    for (c, &gi) in gr.iter().enumerate() {
                        ga[r * cols + start + c] += gi;
                    }
                }
            }
        }
    }
}
