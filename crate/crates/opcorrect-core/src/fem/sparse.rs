//! Compressed sparse row matrices.

use crate::error::{Error, Result};
use crate::fem::Mesh;

/// CSR matrix with strictly increasing column indices within each row.
/// Assembled operators on one mesh all share the node-adjacency pattern, so
/// rebuilding a value array never changes the structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1
            || col_indices.len() != values.len()
            || *row_offsets.last().unwrap_or(&0) != col_indices.len()
        {
            return Err(Error::invalid("inconsistent csr arrays"));
        }
        for r in 0..n_rows {
            if row_offsets[r] > row_offsets[r + 1] {
                return Err(Error::invalid("row offsets must be nondecreasing"));
            }
            let cols = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("column indices must strictly increase"));
            }
            if cols.last().is_some_and(|&c| c >= n_cols) {
                return Err(Error::invalid("column index out of range"));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Zero matrix over the node-adjacency pattern of `mesh` (nodes sharing a
    /// triangle, plus the diagonal).
    pub fn zero_pattern_from_mesh(mesh: &Mesh) -> Self {
        let n = mesh.n_nodes();
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::with_capacity(8); n];
        for tri in &mesh.triangles {
            for &a in tri {
                for &b in tri {
                    neighbors[a].push(b);
                }
            }
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for (node, mut adj) in neighbors.into_iter().enumerate() {
            adj.push(node);
            adj.sort_unstable();
            adj.dedup();
            col_indices.extend_from_slice(&adj);
            row_offsets.push(col_indices.len());
        }
        let values = vec![0.0; col_indices.len()];
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    fn entry_position(&self, r: usize, c: usize) -> Option<usize> {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()]
            .binary_search(&c)
            .ok()
            .map(|k| span.start + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entry_position(r, c).map_or(0.0, |p| self.values[p])
    }

    /// Add `v` to entry `(r, c)`; the entry must exist in the pattern.
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        let p = self
            .entry_position(r, c)
            .expect("entry outside sparsity pattern");
        self.values[p] += v;
    }

    pub fn set_at(&mut self, r: usize, c: usize, v: f64) {
        let p = self
            .entry_position(r, c)
            .expect("entry outside sparsity pattern");
        self.values[p] = v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// `x' A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n_cols);
        let mut acc = 0.0;
        for r in 0..self.n_rows {
            let mut row_acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                row_acc += self.values[k] * x[self.col_indices[k]];
            }
            acc += x[r] * row_acc;
        }
        acc
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, r)).collect()
    }

    /// Row sums (the lumped mass vector for a mass matrix).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn total_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                if c > r {
                    worst = worst.max((v - self.get(c, r)).abs());
                }
            }
        }
        worst / scale
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.n_rows == self.n_cols && self.asymmetry() <= rel_tol
    }

    /// Dense copy, for small oracle comparisons.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut dense = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                dense[(r, c)] = v;
            }
        }
        dense
    }
}
