//! Minimal reverse-mode differentiation over dense matrices.
//!
//! Every primitive records its inputs on the [`Tape`] together with whatever
//! it needs for its backward rule. [`Tape::backward`] walks the recording in
//! exact reverse order and accumulates gradients only into nodes that depend
//! on a `requires_grad` leaf.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ndmath::{sigmoid, Csr, Matrix};

/// Handle to a node recorded on a [`Tape`].
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
    SpMM(Arc<Csr>, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Sigmoid(Var),
    Relu(Var),
    Dropout(Var, Vec<f64>),
    Concat(Vec<Var>),
    Gather(Var, Vec<usize>),
    ScatterAdd { src: Var, targets: Vec<usize>, weights: Option<Vec<f64>> },
    ColumnStandardize { x: Var, inv_std: Vec<f64> },
    SoftmaxCrossEntropy { logits: Var, rows: Vec<usize>, labels: Vec<usize>, probs: Matrix },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
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

    /// Drops every recorded node; handles from before the call become invalid.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.grads.clear();
    }

    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss with respect to `v`, if one was
    /// allocated.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(&mut self, value: Matrix, op: Op, name: &'static str, inputs: &[Var]) -> Result<Var> {
        if cfg!(debug_assertions) && !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let rg = inputs.iter().any(|&v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, op, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push_checked(out, Op::MatMul(a, b), "matmul", &[a, b])
    }

    /// Sparse-dense product `adj · x`.
    pub fn spmm(&mut self, adj: Arc<Csr>, x: Var) -> Result<Var> {
        let out = adj.matmul_dense(self.value(x))?;
        self.push_checked(out, Op::SpMM(adj, x), "spmm", &[x])
    }

    /// Adds the `1 x d` row `bias` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::shape("add_bias", format!("{:?} + bias {:?}", xv.shape(), bv.shape())));
        }
        let mut out = xv.clone();
        let b = bv.row(0).to_vec();
        for i in 0..out.rows() {
            for (o, bb) in out.row_mut(i).iter_mut().zip(&b) {
                *o += bb;
            }
        }
        self.push_checked(out, Op::AddBias(x, bias), "add_bias", &[x, bias])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        self.push_checked(out, Op::Add(a, b), "add", &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        self.push_checked(out, Op::Sub(a, b), "sub", &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        self.push_checked(out, Op::Mul(a, b), "mul", &[a, b])
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        let out = self.value(x).map(|v| scale * v + shift);
        self.push_checked(out, Op::Affine(x, scale), "affine", &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(sigmoid);
        self.push_checked(out, Op::Sigmoid(x), "sigmoid", &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push_checked(out, Op::Relu(x), "relu", &[x])
    }

    /// Inverted dropout: kept units are scaled by `1 / (1 - p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("dropout probability {p} not in [0, 1)")));
        }
        let xv = self.value(x);
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> =
            (0..xv.rows() * xv.cols()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        let data = xv.as_slice().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Matrix::from_vec(xv.rows(), xv.cols(), data)?;
        self.push_checked(out, Op::Dropout(x, mask), "dropout", &[x])
    }

    /// Horizontal concatenation `[a ‖ b ‖ ...]`.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&v| self.value(v).rows());
        if parts.iter().any(|&v| self.value(v).rows() != rows) {
            return Err(Error::shape("concat", "row counts differ"));
        }
        let cols: usize = parts.iter().map(|&v| self.value(v).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for &p in parts {
                let r = self.value(p).row(i);
                out.row_mut(i)[off..off + r.len()].copy_from_slice(r);
                off += r.len();
            }
        }
        self.push_checked(out, Op::Concat(parts.to_vec()), "concat", parts)
    }

    /// Selects rows of `x` by index (repeats allowed).
    pub fn gather(&mut self, x: Var, index: Vec<usize>) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::shape("gather", format!("row {bad} of {}", xv.rows())));
        }
        let out = xv.select_rows(&index);
        self.push_checked(out, Op::Gather(x, index), "gather", &[x])
    }

    /// Accumulates `weights[r] * src[r]` into row `targets[r]` of an
    /// `out_rows x d` zero matrix.
    pub fn scatter_add(
        &mut self,
        src: Var,
        targets: Vec<usize>,
        weights: Option<Vec<f64>>,
        out_rows: usize,
    ) -> Result<Var> {
        let sv = self.value(src);
        if targets.len() != sv.rows() || weights.as_ref().is_some_and(|w| w.len() != sv.rows()) {
            return Err(Error::shape("scatter_add", format!("{} targets for {} rows", targets.len(), sv.rows())));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= out_rows) {
            return Err(Error::shape("scatter_add", format!("target {bad} of {out_rows}")));
        }
        let mut out = Matrix::zeros(out_rows, sv.cols());
        for (r, &t) in targets.iter().enumerate() {
            let w = weights.as_ref().map_or(1.0, |w| w[r]);
            for (o, &v) in out.row_mut(t).iter_mut().zip(sv.row(r)) {
                *o += w * v;
            }
        }
        self.push_checked(out, Op::ScatterAdd { src, targets, weights }, "scatter_add", &[src])
    }

    /// Per-column z-scoring over rows (population variance, `eps` inside the
    /// square root).
    pub fn column_standardize(&mut self, x: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let (n, d) = xv.shape();
        let means = xv.column_means();
        let mut var = vec![0.0; d];
        for i in 0..n {
            for (j, v) in xv.row(i).iter().enumerate() {
                var[j] += (v - means[j]).powi(2);
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v / n.max(1) as f64 + eps).sqrt()).collect();
        let mut out = xv.clone();
        for i in 0..n {
            for (j, o) in out.row_mut(i).iter_mut().enumerate() {
                *o = (*o - means[j]) * inv_std[j];
            }
        }
        self.push_checked(out, Op::ColumnStandardize { x, inv_std }, "column_standardize", &[x])
    }

    /// Mean softmax cross-entropy over the listed `rows` of `logits`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, rows: &[usize], labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if rows.len() != labels.len() || rows.is_empty() {
            return Err(Error::shape("softmax_cross_entropy", format!("{} rows, {} labels", rows.len(), labels.len())));
        }
        let k = lv.cols();
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::shape("softmax_cross_entropy", format!("label {bad} with {k} classes")));
        }
        let mut probs = Matrix::zeros(rows.len(), k);
        let mut loss = 0.0;
        for (r, (&i, &y)) in rows.iter().zip(labels).enumerate() {
            let z = lv.row(i);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for (p, v) in probs.row_mut(r).iter_mut().zip(z) {
                *p = (v - lse).exp();
            }
            loss += lse - z[y];
        }
        loss /= rows.len() as f64;
        let op = Op::SoftmaxCrossEntropy { logits, rows: rows.to_vec(), labels: labels.to_vec(), probs };
        self.push_checked(Matrix::filled(1, 1, loss), op, "softmax_cross_entropy", &[logits])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.push_checked(Matrix::filled(1, 1, s), Op::Sum(x), "sum", &[x])
    }

    /// Back-propagates from a scalar `loss`, replacing any earlier gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::InvalidArgument("backward called on a node not recorded on this tape".into()));
        }
        let (r, c) = self.value(loss).shape();
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss { rows: r, cols: c });
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = self.grads[idx].take() else { continue };
            self.propagate(idx, &g)?;
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Matrix) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&mut self, idx: usize, g: &Matrix) -> Result<()> {
        // Each arm computes input gradients from immutable borrows first, then
        // accumulates, so the node list is never borrowed across `accumulate`.
        let node = &self.nodes[idx];
        let mut pending: Vec<(Var, Matrix)> = Vec::with_capacity(2);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.requires_grad(*a) {
                    pending.push((*a, g.matmul_t(self.value(*b))?));
                }
                if self.requires_grad(*b) {
                    pending.push((*b, self.value(*a).t_matmul(g)?));
                }
            }
            Op::SpMM(adj, x) => pending.push((*x, adj.t_matmul_dense(g)?)),
            Op::AddBias(x, b) => {
                pending.push((*x, g.clone()));
                if self.requires_grad(*b) {
                    pending.push((*b, Matrix::row_vector(&column_sums(g))));
                }
            }
            Op::Add(a, b) => {
                pending.push((*a, g.clone()));
                pending.push((*b, g.clone()));
            }
            Op::Sub(a, b) => {
                pending.push((*a, g.clone()));
                pending.push((*b, g.scale(-1.0)));
            }
            Op::Mul(a, b) => {
                if self.requires_grad(*a) {
                    pending.push((*a, g.zip_map(self.value(*b), |g, v| g * v)?));
                }
                if self.requires_grad(*b) {
                    pending.push((*b, g.zip_map(self.value(*a), |g, v| g * v)?));
                }
            }
            Op::Affine(x, s) => pending.push((*x, g.scale(*s))),
            Op::Sigmoid(x) => pending.push((*x, g.zip_map(&node.value, |g, y| g * y * (1.0 - y))?)),
            Op::Relu(x) => pending.push((*x, g.zip_map(&node.value, |g, y| if y > 0.0 { g } else { 0.0 })?)),
            Op::Dropout(x, mask) => {
                let data = g.as_slice().iter().zip(mask).map(|(g, m)| g * m).collect();
                pending.push((*x, Matrix::from_vec(g.rows(), g.cols(), data)?));
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.requires_grad(p) {
                        let mut gp = Matrix::zeros(g.rows(), w);
                        for i in 0..g.rows() {
                            gp.row_mut(i).copy_from_slice(&g.row(i)[off..off + w]);
                        }
                        pending.push((p, gp));
                    }
                    off += w;
                }
            }
            Op::Gather(x, index) => {
                let mut gx = Matrix::zeros(self.value(*x).rows(), g.cols());
                for (r, &i) in index.iter().enumerate() {
                    for (o, &v) in gx.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                pending.push((*x, gx));
            }
            Op::ScatterAdd { src, targets, weights } => {
                let mut gs = Matrix::zeros(targets.len(), g.cols());
                for (r, &t) in targets.iter().enumerate() {
                    let w = weights.as_ref().map_or(1.0, |w| w[r]);
                    for (o, &v) in gs.row_mut(r).iter_mut().zip(g.row(t)) {
                        *o = w * v;
                    }
                }
                pending.push((*src, gs));
            }
            Op::ColumnStandardize { x, inv_std } => {
                let y = &node.value;
                let n = y.rows() as f64;
                let d = y.cols();
                let mut mean_g = vec![0.0; d];
                let mut mean_gy = vec![0.0; d];
                for i in 0..y.rows() {
                    for j in 0..d {
                        mean_g[j] += g[(i, j)] / n;
                        mean_gy[j] += g[(i, j)] * y[(i, j)] / n;
                    }
                }
                let mut gx = Matrix::zeros(y.rows(), d);
                for i in 0..y.rows() {
                    for j in 0..d {
                        gx[(i, j)] = inv_std[j] * (g[(i, j)] - mean_g[j] - y[(i, j)] * mean_gy[j]);
                    }
                }
                pending.push((*x, gx));
            }
            Op::SoftmaxCrossEntropy { logits, rows, labels, probs } => {
                let upstream = g[(0, 0)];
                let m = rows.len() as f64;
                let mut gl = Matrix::zeros(self.value(*logits).rows(), probs.cols());
                for (r, (&i, &y)) in rows.iter().zip(labels).enumerate() {
                    for (k, (o, &p)) in gl.row_mut(i).iter_mut().zip(probs.row(r)).enumerate() {
                        let onehot = if k == y { 1.0 } else { 0.0 };
                        *o += upstream * (p - onehot) / m;
                    }
                }
                pending.push((*logits, gl));
            }
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                pending.push((*x, Matrix::filled(r, c, g[(0, 0)])));
            }
        }
        for (v, gv) in pending {
            self.accumulate(v, gv);
        }
        Ok(())
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (a, v) in s.iter_mut().zip(m.row(i)) {
            *a += v;
        }
    }
    s
}
