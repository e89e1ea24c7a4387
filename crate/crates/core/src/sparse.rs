//! Coordinate-format sparse matrix, enough for LIBSVM design matrices.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    OutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("duplicate entry at ({row}, {col})")]
    Duplicate { row: usize, col: usize },
}

/// Row/column/value triplets, kept sorted by (row, col).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self, SparseError> {
        let mut seen = HashSet::with_capacity(entries.len());
        for &(row, col, _) in &entries {
            if row >= rows || col >= cols {
                return Err(SparseError::OutOfRange {
                    row,
                    col,
                    rows,
                    cols,
                });
            }
            if !seen.insert((row, col)) {
                return Err(SparseError::Duplicate { row, col });
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let start = self.entries.partition_point(|&(r, _, _)| r < row);
        self.entries[start..]
            .iter()
            .take_while(move |&&(r, _, _)| r == row)
            .map(|&(_, c, v)| (c, v))
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.rows);
        for &(r, c, x) in &self.entries {
            out[r] += x * v[c];
        }
        out
    }

    pub fn tr_mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.cols);
        for &(r, c, x) in &self.entries {
            out[c] += x * v[r];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, x) in &self.entries {
            m[(r, c)] = x;
        }
        m
    }

    /// Scales every column by its largest absolute value; all-zero columns are left alone.
    pub fn scale_columns_max_abs(&self) -> SparseMatrix {
        let mut scale = vec![0.0_f64; self.cols];
        for &(_, c, x) in &self.entries {
            scale[c] = scale[c].max(x.abs());
        }
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, x)| (r, c, if scale[c] > 0.0 { x / scale[c] } else { x }))
            .collect();
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }
}
