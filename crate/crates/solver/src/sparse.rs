//! Compressed sparse row storage for constraint matrices.

use serde::{Deserialize, Serialize};

/// Row-major sparse matrix. Column indices within a row are sorted and unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from rows of `(column, value)` pairs. Duplicate columns in a row are
    /// summed; explicit zeros are kept so that structure stays stable across rebuilds.
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            let mut entries = row.clone();
            entries.sort_by_key(|&(c, _)| c);
            let start = indices.len();
            for (c, v) in entries {
                assert!(c < ncols, "column {c} out of range for {ncols} columns");
                if indices.len() > start && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: rows.len(),
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.nrows).map(|i| self.row(i).collect()).collect()
    }

    /// `y = M x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `y += alpha * M^T x`
    pub fn tmul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                y[j] += alpha * v * xi;
            }
        }
    }

    /// `M^T x`
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tmul_add(1.0, x, &mut y);
        y
    }

    /// Scales row `i` by `row_scale[i]` and column `j` by `col_scale[j]`.
    pub fn scale(&mut self, row_scale: &[f64], col_scale: &[f64]) {
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                self.values[k] *= row_scale[i] * col_scale[self.indices[k]];
            }
        }
    }

    /// Infinity norm of each row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).fold(0.0_f64, |m, (_, v)| m.max(v.abs())))
            .collect()
    }

    /// Folds the infinity norm of each column into `norms`.
    pub fn fold_col_norms(&self, norms: &mut [f64]) {
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            norms[j] = norms[j].max(v.abs());
        }
    }

    /// Vertically stacks `self` on top of `other`.
    pub fn vstack(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.ncols);
        let offset = self.nnz();
        let mut indptr = self.indptr.clone();
        indptr.extend(other.indptr[1..].iter().map(|p| p + offset));
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        CsrMatrix {
            nrows: self.nrows + other.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let m = CsrMatrix::from_rows(3, &[vec![(2, 1.0), (0, 2.0), (2, 3.0)], vec![]]);
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 2.0), (2, 4.0)]);
        assert_eq!(m.row(1).count(), 0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![6.0, 0.0]);
        assert_eq!(m.tmul_vec(&[1.0, 5.0]), vec![2.0, 0.0, 4.0]);
    }

    #[test]
    fn vstack_keeps_rows() {
        let a = CsrMatrix::from_rows(2, &[vec![(0, 1.0)]]);
        let b = CsrMatrix::from_rows(2, &[vec![(1, 2.0)], vec![(0, 3.0), (1, 4.0)]]);
        let c = a.vstack(&b);
        assert_eq!(c.nrows(), 3);
        assert_eq!(c.mul_vec(&[1.0, 1.0]), vec![1.0, 2.0, 7.0]);
    }
}
