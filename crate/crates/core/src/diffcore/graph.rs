use std::sync::Arc;

use super::params::ParamStore;
use super::sparse::CsrMatrix;
use super::tensor::{gemm, Tensor};
use crate::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    MatMul(Var, Var),
    Transpose(Var),
    /// `x + b` with `b` a `1×m` row broadcast over rows.
    AddRow(Var, Var),
    /// `x ⊙ s` with `s` a `1×m` row broadcast over rows.
    MulRow(Var, Var),
    /// `x / d` with `d` an `n×1` column broadcast over columns.
    DivCol(Var, Var),
    SumRows(Var),
    Sum(Var),
    Mean(Var),
    Softmax(Var),
    /// Row-wise normalization; stores `1/σ` per row.
    LayerNorm(Var, Vec<f64>),
    Gelu(Var),
    Relu(Var),
    ColSlice(Var, usize),
    ConcatCols(Vec<Var>),
    Sparse(Arc<CsrMatrix>, Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| s * x);
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, s), rg)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        let rg = self.rg(a);
        self.push(v, Op::AddConst(a), rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(Error::shape("matmul", format!("{m}x{k} · {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        gemm(self.value(a).data(), m, k, false, self.value(b).data(), k2, n, false, 0.0, &mut out);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(m, n, out), Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(v, Op::Transpose(a), rg)
    }

    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (n, m) = self.dims(x);
        if self.value(b).len() != m {
            return Err(Error::shape("add_row", format!("{n}x{m} + row of {}", self.value(b).len())));
        }
        let bd = self.value(b).data().to_vec();
        let mut v = self.value(x).clone();
        for row in v.data_mut().chunks_mut(m) {
            for (o, bb) in row.iter_mut().zip(&bd) {
                *o += bb;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(v, Op::AddRow(x, b), rg))
    }

    pub fn mul_row(&mut self, x: Var, s: Var) -> Result<Var> {
        let (n, m) = self.dims(x);
        if self.value(s).len() != m {
            return Err(Error::shape("mul_row", format!("{n}x{m} * row of {}", self.value(s).len())));
        }
        let sd = self.value(s).data().to_vec();
        let mut v = self.value(x).clone();
        for row in v.data_mut().chunks_mut(m) {
            for (o, ss) in row.iter_mut().zip(&sd) {
                *o *= ss;
            }
        }
        let rg = self.rg(x) || self.rg(s);
        Ok(self.push(v, Op::MulRow(x, s), rg))
    }

    pub fn div_col(&mut self, x: Var, d: Var) -> Result<Var> {
        let (n, m) = self.dims(x);
        if self.value(d).len() != n {
            return Err(Error::shape("div_col", format!("{n}x{m} / column of {}", self.value(d).len())));
        }
        let dd = self.value(d).data().to_vec();
        let mut v = self.value(x).clone();
        for (row, den) in v.data_mut().chunks_mut(m).zip(&dd) {
            for o in row.iter_mut() {
                *o /= den;
            }
        }
        let rg = self.rg(x) || self.rg(d);
        Ok(self.push(v, Op::DivCol(x, d), rg))
    }

    /// Column sums, `1×m`.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let (_, m) = self.dims(x);
        let mut out = vec![0.0; m];
        for row in self.value(x).data().chunks(m) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let rg = self.rg(x);
        self.push(Tensor::from_parts(1, m, out), Op::SumRows(x), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.sum() / t.len() as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    /// Softmax along each row.
    pub fn softmax(&mut self, x: Var) -> Var {
        let (_, m) = self.dims(x);
        let mut v = self.value(x).clone();
        for row in v.data_mut().chunks_mut(m) {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for o in row.iter_mut() {
                *o = (*o - mx).exp();
                z += *o;
            }
            for o in row.iter_mut() {
                *o /= z;
            }
        }
        let rg = self.rg(x);
        self.push(v, Op::Softmax(x), rg)
    }

    /// Row-wise `(x − mean) / sqrt(var + eps)` without affine terms.
    pub fn layer_norm(&mut self, x: Var, eps: f64) -> Var {
        let (n, m) = self.dims(x);
        let mut v = self.value(x).clone();
        let mut inv = Vec::with_capacity(n);
        for row in v.data_mut().chunks_mut(m) {
            let mu = row.iter().sum::<f64>() / m as f64;
            let var = row.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / m as f64;
            let is = 1.0 / (var + eps).sqrt();
            for o in row.iter_mut() {
                *o = (*o - mu) * is;
            }
            inv.push(is);
        }
        let rg = self.rg(x);
        self.push(v, Op::LayerNorm(x, inv), rg)
    }

    /// GELU, tanh form.
    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(gelu);
        let rg = self.rg(x);
        self.push(v, Op::Gelu(x), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|a| a.max(0.0));
        let rg = self.rg(x);
        self.push(v, Op::Relu(x), rg)
    }

    pub fn col_slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (n, m) = self.dims(x);
        if len == 0 || start + len > m {
            return Err(Error::shape("col_slice", format!("[{start}, {}) of {m} columns", start + len)));
        }
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(n * len);
        for r in 0..n {
            out.extend_from_slice(&src[r * m + start..r * m + start + len]);
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::from_parts(n, len, out), Op::ColSlice(x, start), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let n = self.dims(parts[0]).0;
        if parts.iter().any(|&p| self.dims(p).0 != n) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let m: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut out = Vec::with_capacity(n * m);
        for r in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Tensor::from_parts(n, m, out), Op::ConcatCols(parts.to_vec()), rg))
    }

    /// `A·x` for a fixed sparse `A`.
    pub fn sparse(&mut self, a: &Arc<CsrMatrix>, x: Var) -> Result<Var> {
        if a.cols() != self.dims(x).0 {
            return Err(Error::shape("sparse", format!("{}x{} · {} rows", a.rows(), a.cols(), self.dims(x).0)));
        }
        let v = a.apply_mat(self.value(x));
        let rg = self.rg(x);
        Ok(self.push(v, Op::Sparse(Arc::clone(a), x), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::shape("backward", format!("loss must be scalar, got {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, t: Tensor| {
            if !self.rg(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(e) => e.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    acc(*a, g.zip_map(self.value(*b), |x, y| x * y));
                }
                if self.rg(*b) {
                    acc(*b, g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::Scale(a, s) => acc(*a, g.map(|x| s * x)),
            Op::AddConst(a) => acc(*a, g.clone()),
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let (_, n) = self.dims(*b);
                if self.rg(*a) {
                    let mut ga = vec![0.0; m * k];
                    gemm(g.data(), m, n, false, self.value(*b).data(), k, n, true, 0.0, &mut ga);
                    acc(*a, Tensor::from_parts(m, k, ga).reshaped_like(self.value(*a)));
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; k * n];
                    gemm(self.value(*a).data(), m, k, true, g.data(), m, n, false, 0.0, &mut gb);
                    acc(*b, Tensor::from_parts(k, n, gb).reshaped_like(self.value(*b)));
                }
            }
            Op::Transpose(a) => acc(*a, g.transpose().reshaped_like(self.value(*a))),
            Op::AddRow(x, b) => {
                acc(*x, g.clone());
                if self.rg(*b) {
                    let m = g.cols();
                    let mut gb = vec![0.0; m];
                    for row in g.data().chunks(m) {
                        for (o, v) in gb.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    acc(*b, Tensor::from_parts(1, m, gb).reshaped_like(self.value(*b)));
                }
            }
            Op::MulRow(x, s) => {
                let m = g.cols();
                if self.rg(*x) {
                    let sd = self.value(*s).data();
                    let mut gx = g.clone();
                    for row in gx.data_mut().chunks_mut(m) {
                        for (o, ss) in row.iter_mut().zip(sd) {
                            *o *= ss;
                        }
                    }
                    acc(*x, gx);
                }
                if self.rg(*s) {
                    let mut gs = vec![0.0; m];
                    for (grow, xrow) in g.data().chunks(m).zip(self.value(*x).data().chunks(m)) {
                        for ((o, gg), xx) in gs.iter_mut().zip(grow).zip(xrow) {
                            *o += gg * xx;
                        }
                    }
                    acc(*s, Tensor::from_parts(1, m, gs).reshaped_like(self.value(*s)));
                }
            }
            Op::DivCol(x, d) => {
                let m = g.cols();
                let dd = self.value(*d).data();
                if self.rg(*x) {
                    let mut gx = g.clone();
                    for (row, den) in gx.data_mut().chunks_mut(m).zip(dd) {
                        for o in row.iter_mut() {
                            *o /= den;
                        }
                    }
                    acc(*x, gx);
                }
                if self.rg(*d) {
                    // y = x/d, so dy/dd = -y/d
                    let y = &node.value;
                    let gd: Vec<f64> = g
                        .data()
                        .chunks(m)
                        .zip(y.data().chunks(m))
                        .zip(dd)
                        .map(|((gr, yr), den)| -gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / den)
                        .collect();
                    acc(*d, Tensor::from_parts(dd.len(), 1, gd).reshaped_like(self.value(*d)));
                }
            }
            Op::SumRows(x) => {
                let (n, m) = self.dims(*x);
                let mut gx = Vec::with_capacity(n * m);
                for _ in 0..n {
                    gx.extend_from_slice(g.data());
                }
                acc(*x, Tensor::from_parts(n, m, gx).reshaped_like(self.value(*x)));
            }
            Op::Sum(x) => {
                let gv = g.item();
                acc(*x, Tensor::full(self.value(*x).shape(), gv));
            }
            Op::Mean(x) => {
                let t = self.value(*x);
                acc(*x, Tensor::full(t.shape(), g.item() / t.len() as f64));
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let m = y.cols();
                let mut gx = g.clone();
                for (grow, yrow) in gx.data_mut().chunks_mut(m).zip(y.data().chunks(m)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for (o, yy) in grow.iter_mut().zip(yrow) {
                        *o = yy * (*o - dot);
                    }
                }
                acc(*x, gx);
            }
            Op::LayerNorm(x, inv) => {
                let xhat = &node.value;
                let m = xhat.cols();
                let mf = m as f64;
                let mut gx = g.clone();
                for ((grow, hrow), is) in gx.data_mut().chunks_mut(m).zip(xhat.data().chunks(m)).zip(inv) {
                    let mg = grow.iter().sum::<f64>() / mf;
                    let mgh = grow.iter().zip(hrow).map(|(a, b)| a * b).sum::<f64>() / mf;
                    for (o, h) in grow.iter_mut().zip(hrow) {
                        *o = is * (*o - mg - h * mgh);
                    }
                }
                acc(*x, gx);
            }
            Op::Gelu(x) => acc(*x, g.zip_map(self.value(*x), |gg, xx| gg * gelu_grad(xx))),
            Op::Relu(x) => acc(*x, g.zip_map(self.value(*x), |gg, xx| if xx > 0.0 { gg } else { 0.0 })),
            Op::ColSlice(x, start) => {
                let (n, m) = self.dims(*x);
                let len = g.cols();
                let mut gx = vec![0.0; n * m];
                for r in 0..n {
                    gx[r * m + start..r * m + start + len].copy_from_slice(g.row(r));
                }
                acc(*x, Tensor::from_parts(n, m, gx));
            }
            Op::ConcatCols(parts) => {
                let n = g.rows();
                let mut off = 0;
                for &p in parts {
                    let w = self.dims(p).1;
                    if self.rg(p) {
                        let mut gp = Vec::with_capacity(n * w);
                        for r in 0..n {
                            gp.extend_from_slice(&g.row(r)[off..off + w]);
                        }
                        acc(p, Tensor::from_parts(n, w, gp));
                    }
                    off += w;
                }
            }
            Op::Sparse(a, x) => {
                let mut gx = Tensor::zeros(&[a.cols(), g.cols()]);
                a.apply_transpose_acc(g, &mut gx);
                acc(*x, gx.reshaped_like(self.value(*x)));
            }
        }
    }
}

impl Tensor {
    fn reshaped_like(self, like: &Tensor) -> Tensor {
        if self.shape() == like.shape() {
            self
        } else {
            Tensor::new(like.shape().to_vec(), self.into_data()).expect("same element count")
        }
    }
}

/// Per-node adjoints from one backward sweep.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`; all zeros when `v` does not reach the loss.
    pub fn wrt(&self, v: Var, like: &Tensor) -> Tensor {
        match self.grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => g.clone(),
            None => Tensor::zeros(like.shape()),
        }
    }
}

/// Gradient of a scalar loss with respect to every parameter in `params`.
///
/// `build` receives a fresh graph and one leaf per parameter (in store order)
/// and returns the loss node. Frozen parameters enter as constants, so their
/// gradients are exactly zero. The store is not modified.
pub fn grad<F>(params: &ParamStore, build: F) -> Result<(f64, Vec<Tensor>)>
where
    F: FnOnce(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params
        .iter()
        .map(|(_, t, trainable)| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) })
        .collect();
    let loss = build(&mut g, &vars)?;
    let value = g.value(loss).item();
    let grads = g.backward(loss)?;
    let out = params.iter().zip(&vars).map(|((_, t, _), &v)| grads.wrt(v, t)).collect();
    Ok((value, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, d: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, d.to_vec()).unwrap()
    }

    #[test]
    fn square_sum_gradient_is_twice_w() {
        let mut g = Graph::new();
        let w = g.param(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let sq = g.mul(w, w).unwrap();
        let loss = g.sum(sq);
        let gr = g.backward(loss).unwrap().wrt(w, g.value(w));
        assert_eq!(gr.data(), &[2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn constant_loss_gives_zero_gradient() {
        let mut g = Graph::new();
        let w = g.param(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let c = g.constant(Tensor::scalar(5.0));
        let grads = g.backward(c).unwrap();
        assert_eq!(grads.wrt(w, g.value(w)).data(), &[0.0; 4]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut g = Graph::new();
        let w = g.param(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(matches!(g.backward(w), Err(Error::Shape { .. })));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new();
        let x = g.constant(t(2, 3, &[1.0, -2.0, 0.5, 100.0, 100.0, -100.0]));
        let y = g.softmax(x);
        for r in 0..2 {
            let s: f64 = g.value(y).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        assert!(g.matmul(a, b).is_err());
        let c = g.constant(Tensor::zeros(&[3, 2]));
        assert!(g.add(a, c).is_err());
        assert!(g.col_slice(a, 2, 2).is_err());
    }
}
