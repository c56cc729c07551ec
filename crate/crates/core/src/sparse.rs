//! Compressed sparse row storage for the assembled interior-DOF systems.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Row-compressed index structure. Column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CsrPattern {
    /// Builds a pattern from per-row column sets. Duplicates are removed.
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            debug_assert!(row.iter().all(|&c| c < dim));
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        Self {
            dim,
            row_ptr,
            col_idx,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Storage slot of entry `(i, j)`, if structurally present.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }

    /// Smallest column index in row `i`, or `i` for an empty row.
    pub fn first_col(&self, i: usize) -> usize {
        self.row(i).first().copied().unwrap_or(i).min(i)
    }
}

/// Sparse matrix over a shared pattern. Both triangles are stored.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let nnz = pattern.nnz();
        Self {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    pub fn from_parts(pattern: Arc<CsrPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::Shape {
                expected: pattern.nnz(),
                found: values.len(),
            });
        }
        Ok(Self { pattern, values })
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entry `(i, j)`, zero if structurally absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Exact structural and numerical symmetry check.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim()).all(|i| {
            self.pattern
                .row_range(i)
                .all(|s| self.get(self.pattern.col_idx[s], i) == self.values[s])
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x`, accumulated row by row in column order.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::Shape {
                expected: n,
                found: x.len(),
            });
        }
        if y.len() != n {
            return Err(Error::Shape {
                expected: n,
                found: y.len(),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for s in self.pattern.row_range(i) {
                acc += self.values[s] * x[self.pattern.col_idx[s]];
            }
            *yi = acc;
        }
        Ok(())
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let ax = self.matvec(x)?;
        Ok(ax.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    /// `self + alpha * other` over an identical pattern.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.pattern != other.pattern {
            return Err(Error::Shape {
                expected: self.nnz(),
                found: other.nnz(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(CsrMatrix {
            pattern: Arc::clone(&self.pattern),
            values,
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for s in self.pattern.row_range(i) {
                row[self.pattern.col_idx[s]] = self.values[s];
            }
        }
        d
    }

    /// Dense-to-sparse conversion dropping exact zeros off the diagonal.
    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let rows = a
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .filter(|&(j, v)| *v != 0.0 || i == j)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        let pattern = Arc::new(CsrPattern::from_rows(rows));
        let mut values = vec![0.0; pattern.nnz()];
        for (i, r) in a.iter().enumerate() {
            for s in pattern.row_range(i) {
                values[s] = r[pattern.col_idx[s]];
            }
        }
        Self { pattern, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_roundtrip_and_matvec() {
        let a = vec![
            vec![4.0, -1.0, 0.0],
            vec![-1.0, 4.0, -1.0],
            vec![0.0, -1.0, 4.0],
        ];
        let m = CsrMatrix::from_dense(&a);
        assert_eq!(m.nnz(), 7);
        assert_eq!(m.to_dense(), a);
        assert!(m.is_symmetric());
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 2.0, 3.0]);
        assert_eq!(m.pattern().first_col(2), 1);
    }

    #[test]
    fn matvec_rejects_wrong_length() {
        let m = CsrMatrix::from_dense(&[vec![1.0]]);
        assert!(matches!(
            m.matvec(&[1.0, 2.0]),
            Err(Error::Shape { expected: 1, found: 2 })
        ));
    }
}
