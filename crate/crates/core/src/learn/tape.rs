//! Reverse-mode automatic differentiation over dense matrices.

use std::sync::Arc;

use super::tensor::{Matrix, SparseOp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseOp>, Var),
    /// `Σ_t s_t · A_t · x` with `s` a 1×T row.
    Mix(Arc<Vec<SparseOp>>, Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    MulConst(Var, Matrix),
    LogSoftmaxRows(Var),
    SoftmaxRow(Var),
    /// Negative mean log-likelihood over (row, class) targets.
    Nll(Var, Vec<(usize, usize)>),
    /// Scalar `⟨c, x⟩`.
    WeightedSum(Var, Matrix),
    Mean(Vec<Var>),
}

struct Entry {
    value: Matrix,
    op: Op,
}

/// Records a forward computation so gradients can be replayed backwards.
#[derive(Default)]
pub struct Tape {
    entries: Vec<Entry>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.entries[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { op: name });
        }
        self.entries.push(Entry { value, op });
        Ok(Var(self.entries.len() - 1))
    }

    pub fn leaf(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Leaf, "leaf")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push(v, Op::MatMul(a, b), "matmul")
    }

    pub fn spmm(&mut self, s: Arc<SparseOp>, x: Var) -> Result<Var> {
        let v = s.fwd.matmul_dense(self.value(x))?;
        self.push(v, Op::SpMM(s, x), "spmm")
    }

    pub fn mix(&mut self, adjs: Arc<Vec<SparseOp>>, weights: Var, x: Var) -> Result<Var> {
        let w = self.value(weights);
        let xv = self.value(x);
        if w.rows != 1 || w.cols != adjs.len() {
            return Err(Error::ShapeMismatch {
                op: "mix",
                detail: format!("weights {:?} for {} adjacencies", w.shape(), adjs.len()),
            });
        }
        let mut out = Matrix::zeros(adjs.first().map_or(xv.rows, |a| a.rows()), xv.cols);
        for (t, a) in adjs.iter().enumerate() {
            if a.cols() != xv.rows || a.rows() != out.rows {
                return Err(Error::ShapeMismatch {
                    op: "mix",
                    detail: format!("adjacency {}x{} with input {:?}", a.rows(), a.cols(), xv.shape()),
                });
            }
            a.fwd.accumulate(w.data[t], xv, &mut out);
        }
        self.push(out, Op::Mix(adjs, weights, x), "mix")
    }

    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(b);
        if bv.rows != 1 || bv.cols != xv.cols {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                detail: format!("{:?} + row {:?}", xv.shape(), bv.shape()),
            });
        }
        let mut out = xv.clone();
        for r in 0..out.rows {
            for (o, b) in out.row_mut(r).iter_mut().zip(&bv.data) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(x, b), "add_row")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        self.push(v, Op::Add(a, b), "add")
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Result<Var> {
        let v = self.value(x).scale(k);
        self.push(v, Op::Scale(x, k), "scale")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let v = Matrix {
            data: xv.data.iter().map(|a| a.max(0.0)).collect(),
            ..*xv
        };
        self.push(v, Op::Relu(x), "relu")
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mul_const(&mut self, x: Var, c: Matrix) -> Result<Var> {
        let v = self.value(x).hadamard(&c)?;
        self.push(v, Op::MulConst(x, c), "mul_const")
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let mut out = xv.clone();
        for r in 0..out.rows {
            let row = out.row_mut(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        self.push(out, Op::LogSoftmaxRows(x), "log_softmax")
    }

    pub fn softmax_row(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rows != 1 {
            return Err(Error::ShapeMismatch {
                op: "softmax_row",
                detail: format!("expected one row, got {:?}", xv.shape()),
            });
        }
        Ok(self.push(softmax(&xv.data), Op::SoftmaxRow(x), "softmax")?)
    }

    pub fn nll(&mut self, logp: Var, targets: Vec<(usize, usize)>) -> Result<Var> {
        let lv = self.value(logp);
        if targets.is_empty() {
            return Err(Error::EmptySplit("batch"));
        }
        if let Some(&(r, c)) = targets.iter().find(|(r, c)| *r >= lv.rows || *c >= lv.cols) {
            return Err(Error::ShapeMismatch {
                op: "nll",
                detail: format!("target ({r},{c}) outside {:?}", lv.shape()),
            });
        }
        let loss = -targets.iter().map(|&(r, c)| lv.get(r, c)).sum::<f64>() / targets.len() as f64;
        self.push(Matrix::from_vec(1, 1, vec![loss])?, Op::Nll(logp, targets), "nll")
    }

    pub fn weighted_sum(&mut self, x: Var, c: Matrix) -> Result<Var> {
        let s = self.value(x).dot(&c)?;
        self.push(Matrix::from_vec(1, 1, vec![s])?, Op::WeightedSum(x, c), "weighted_sum")
    }

    pub fn mean(&mut self, xs: Vec<Var>) -> Result<Var> {
        let first = xs.first().ok_or(Error::ShapeMismatch {
            op: "mean",
            detail: "no inputs".into(),
        })?;
        let mut acc = self.value(*first).clone();
        for x in &xs[1..] {
            acc.add_assign(self.value(*x))?;
        }
        let v = acc.scale(1.0 / xs.len() as f64);
        self.push(v, Op::Mean(xs), "mean")
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Vec<Option<Matrix>>> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::ShapeMismatch {
                op: "backward",
                detail: format!("loss must be 1x1, got {:?}", lv.shape()),
            });
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.entries.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0])?);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let entry = &self.entries[i];
            let send = |v: Var, d: Matrix, grads: &mut Vec<Option<Matrix>>| -> Result<()> {
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&d),
                    slot @ None => {
                        *slot = Some(d);
                        Ok(())
                    }
                }
            };
            match &entry.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul_t(self.value(*b))?;
                    let db = self.value(*a).t_matmul(&g)?;
                    send(*a, da, &mut grads)?;
                    send(*b, db, &mut grads)?;
                }
                Op::SpMM(s, x) => {
                    send(*x, s.bwd.matmul_dense(&g)?, &mut grads)?;
                }
                Op::Mix(adjs, w, x) => {
                    let wv = self.value(*w);
                    let xv = self.value(*x);
                    let mut dx = Matrix::zeros(xv.rows, xv.cols);
                    let mut dw = Matrix::zeros(1, adjs.len());
                    for (t, a) in adjs.iter().enumerate() {
                        let atg = a.bwd.matmul_dense(&g)?;
                        dw.data[t] = atg.dot(xv)?;
                        dx.axpy(wv.data[t], &atg)?;
                    }
                    send(*x, dx, &mut grads)?;
                    send(*w, dw, &mut grads)?;
                }
                Op::AddRow(x, b) => {
                    let mut db = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (d, v) in db.data.iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                    send(*b, db, &mut grads)?;
                    send(*x, g.clone(), &mut grads)?;
                }
                Op::Add(a, b) => {
                    send(*a, g.clone(), &mut grads)?;
                    send(*b, g.clone(), &mut grads)?;
                }
                Op::Scale(x, k) => send(*x, g.scale(*k), &mut grads)?,
                Op::Relu(x) => {
                    let y = &entry.value;
                    let data = g.data.iter().zip(&y.data).map(|(d, y)| if *y > 0.0 { *d } else { 0.0 }).collect();
                    send(*x, Matrix { data, ..g }, &mut grads)?;
                }
                Op::MulConst(x, c) => send(*x, g.hadamard(c)?, &mut grads)?,
                Op::LogSoftmaxRows(x) => {
                    let y = &entry.value;
                    let mut dx = g.clone();
                    for r in 0..g.rows {
                        let s: f64 = g.row(r).iter().sum();
                        for (d, yv) in dx.row_mut(r).iter_mut().zip(y.row(r)) {
                            *d -= yv.exp() * s;
                        }
                    }
                    send(*x, dx, &mut grads)?;
                }
                Op::SoftmaxRow(x) => {
                    let y = &entry.value;
                    let inner: f64 = g.data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
                    let data = g.data.iter().zip(&y.data).map(|(d, yv)| yv * (d - inner)).collect();
                    send(*x, Matrix { data, ..g }, &mut grads)?;
                }
                Op::Nll(x, targets) => {
                    let xv = self.value(*x);
                    let mut dx = Matrix::zeros(xv.rows, xv.cols);
                    let k = -g.data[0] / targets.len() as f64;
                    for &(r, c) in targets {
                        dx.data[r * xv.cols + c] += k;
                    }
                    send(*x, dx, &mut grads)?;
                }
                Op::WeightedSum(x, c) => send(*x, c.scale(g.data[0]), &mut grads)?,
                Op::Mean(xs) => {
                    let d = g.scale(1.0 / xs.len() as f64);
                    for x in xs {
                        send(*x, d.clone(), &mut grads)?;
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(grads)
    }
}

pub fn softmax(xs: &[f64]) -> Matrix {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Matrix {
        rows: 1,
        cols: xs.len(),
        data: e.into_iter().map(|v| v / s).collect(),
    }
}
