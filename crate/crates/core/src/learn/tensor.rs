use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "from_vec",
                detail: format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                detail: format!("{:?} x {:?}", self.shape(), other.shape()),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch {
                op: "t_matmul",
                detail: format!("{:?}ᵀ x {:?}", self.shape(), other.shape()),
            });
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let arow = self.row(r);
            let brow = other.row(r);
            for (k, a) in arow.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                op: "matmul_t",
                detail: format!("{:?} x {:?}ᵀ", self.shape(), other.shape()),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = a.iter().zip(other.row(j)).map(|(x, y)| x * y).sum();
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    fn check_same(&self, other: &Matrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                detail: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other, "add")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { data, ..*self })
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.check_same(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn axpy(&mut self, alpha: f64, other: &Matrix) -> Result<()> {
        self.check_same(other, "axpy")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&self, k: f64) -> Matrix {
        Matrix {
            data: self.data.iter().map(|v| v * k).collect(),
            ..*self
        }
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other, "hadamard")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Matrix { data, ..*self })
    }

    pub fn dot(&self, other: &Matrix) -> Result<f64> {
        self.check_same(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Compressed sparse row matrix with sorted, deduplicated column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds from coordinate triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(Error::ShapeMismatch {
                op: "csr",
                detail: format!("entry ({r},{c}) outside {rows}x{cols}"),
            });
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Csr {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn transpose(&self) -> Csr {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                trip.push((c, r, v));
            }
        }
        Csr::from_triplets(self.cols, self.rows, trip).expect("transpose stays in bounds")
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                m.data[r * self.cols + c] += v;
            }
        }
        m
    }

    pub fn matmul_dense(&self, x: &Matrix) -> Result<Matrix> {
        if self.cols != x.rows {
            return Err(Error::ShapeMismatch {
                op: "spmm",
                detail: format!("{}x{} x {:?}", self.rows, self.cols, x.shape()),
            });
        }
        let mut out = Matrix::zeros(self.rows, x.cols);
        self.accumulate(1.0, x, &mut out);
        Ok(out)
    }

    /// `out += alpha · self · x` (shapes assumed checked).
    pub(crate) fn accumulate(&self, alpha: f64, x: &Matrix, out: &mut Matrix) {
        let w = x.cols;
        for r in 0..self.rows {
            let orow = &mut out.data[r * w..(r + 1) * w];
            for (c, v) in self.row_entries(r) {
                let a = alpha * v;
                let xrow = &x.data[c * w..(c + 1) * w];
                for (o, b) in orow.iter_mut().zip(xrow) {
                    *o += a * b;
                }
            }
        }
    }

    /// Each row divided by its sum (empty rows stay empty).
    pub fn row_normalized(&self) -> Csr {
        let mut out = self.clone();
        for r in 0..self.rows {
            let s: f64 = out.values[out.indptr[r]..out.indptr[r + 1]].iter().sum();
            if s != 0.0 {
                for v in &mut out.values[out.indptr[r]..out.indptr[r + 1]] {
                    *v /= s;
                }
            }
        }
        out
    }

    /// `D^-1/2 (A + I) D^-1/2` for a square matrix.
    pub fn sym_normalized_with_self_loops(&self) -> Csr {
        let n = self.rows;
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + n);
        for r in 0..n {
            for (c, v) in self.row_entries(r) {
                if r != c {
                    trip.push((r, c, v));
                }
            }
            trip.push((r, r, 1.0));
        }
        let a = Csr::from_triplets(n, n, trip).expect("square");
        let deg: Vec<f64> = (0..n).map(|r| a.row_entries(r).map(|(_, v)| v).sum::<f64>()).collect();
        let mut out = a;
        for r in 0..n {
            for k in out.indptr[r]..out.indptr[r + 1] {
                let c = out.indices[k];
                out.values[k] /= (deg[r] * deg[c]).sqrt();
            }
        }
        out
    }
}

/// A constant sparse operand together with its transpose, for gradients.
#[derive(Debug, Clone)]
pub struct SparseOp {
    pub fwd: Csr,
    pub bwd: Csr,
}

impl SparseOp {
    pub fn new(m: Csr) -> Self {
        let bwd = m.transpose();
        SparseOp { fwd: m, bwd }
    }

    pub fn rows(&self) -> usize {
        self.fwd.rows
    }

    pub fn cols(&self) -> usize {
        self.fwd.cols
    }
}
