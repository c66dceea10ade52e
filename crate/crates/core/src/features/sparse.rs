use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Row-compressed sparse matrix; column indices strictly increase in a row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs sorted by column.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) -> Result<()> {
        let mut prev: Option<usize> = None;
        for &(c, v) in entries {
            if c >= self.n_cols {
                return Err(Error::DimensionMismatch { expected: self.n_cols, got: c + 1 });
            }
            if prev.is_some_and(|p| p >= c) {
                return Err(Error::invalid("sparse row columns must strictly increase"));
            }
            if !v.is_finite() {
                return Err(Error::invalid("sparse values must be finite"));
            }
            prev = Some(c);
        }
        for &(c, v) in entries {
            self.indices.push(c);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
        self.n_rows += 1;
        Ok(())
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> Matrix<f64> {
        let mut m = Matrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                m[(i, c)] = v;
            }
        }
        m
    }

    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut out = SparseMatrix::new(self.n_cols);
        for &r in rows {
            let (idx, val) = self.row(r);
            out.indices.extend_from_slice(idx);
            out.values.extend_from_slice(val);
            out.indptr.push(out.indices.len());
            out.n_rows += 1;
        }
        out
    }

    /// Column sums.
    pub fn column_totals(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.n_cols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            t[c] += v;
        }
        t
    }
}
