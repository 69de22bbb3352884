//! Row-major dense matrices. Only used where a dense form is required: test
//! oracles, small shift matrices, and command output.

use crate::error::{Error, Result};

/// Default limit on the number of entries of any materialized matrix.
pub const DEFAULT_DENSE_CAP: usize = 1 << 20;

/// Fails with a capacity error when a `rows x cols` matrix would exceed `cap` entries.
pub fn check_dense_cap(what: &str, rows: usize, cols: usize, cap: usize) -> Result<()> {
    let entries = rows as u128 * cols as u128;
    if entries > cap as u128 {
        return Err(Error::capacity(
            format!("dense {what} ({rows}x{cols})"),
            entries,
            cap as u128,
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::contract(format!(
                "{rows}x{cols} matrix cannot hold {} entries",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::contract("ragged rows"));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::contract("columns of unequal length"));
        }
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m.data[i * m.cols + j] = *v;
            }
        }
        if m.data.is_empty() {
            return Err(Error::contract("empty matrix"));
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub(crate) fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(l)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::contract(format!(
                "vector of length {} for a matrix with {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn max_abs_difference(&self, other: &DenseMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        crate::simplex::max_abs_difference(&self.data, &other.data)
    }

    /// Every entry `>= 0` and every column sums to one within `tol`.
    pub fn is_column_stochastic(&self, tol: f64) -> bool {
        if self.data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return false;
        }
        (0..self.cols).all(|j| {
            let s: f64 = (0..self.rows).map(|i| self.get(i, j)).sum();
            (s - 1.0).abs() <= tol
        })
    }

    /// Exactly one `1.0` per row and per column, zeros elsewhere.
    pub fn is_permutation(&self) -> bool {
        if !self.is_square() || self.data.iter().any(|&v| v != 0.0 && v != 1.0) {
            return false;
        }
        let rows_ok =
            (0..self.rows).all(|i| self.row(i).iter().filter(|&&v| v == 1.0).count() == 1);
        let cols_ok =
            (0..self.cols).all(|j| (0..self.rows).filter(|&i| self.get(i, j) == 1.0).count() == 1);
        rows_ok && cols_ok
    }

    /// Integer power of a square matrix; `pow(0)` is the identity.
    pub fn pow(&self, exp: usize) -> Result<DenseMatrix> {
        if !self.is_square() {
            return Err(Error::contract("power of a non-square matrix"));
        }
        let mut acc = DenseMatrix::identity(self.rows);
        for _ in 0..exp {
            acc = acc.matmul(self)?;
        }
        Ok(acc)
    }
}
