//! Sparse binary adjacency algebra and normalized propagation matrices.
//!
//! [`SparseBinaryMatrix`] carries the channel adjacencies and their boolean
//! products; [`SparseRealMatrix`] carries the symmetric-normalized operator
//! used for message passing. Both are CSR with columns strictly sorted per
//! row and no duplicates.

use std::io::Write;

use crate::dense::DenseMatrix;
use crate::{Result, SgptError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparseBinaryMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
        }
    }

    /// Build from (row, col) positions; sorts and deduplicates.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = entries.into_iter().collect();
        for &(r, c) in &pairs {
            if r >= rows || c >= cols {
                return Err(SgptError::InvalidInput(format!(
                    "entry ({r},{c}) out of bounds for {rows}x{cols}"
                )));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _) in &pairs {
            row_ptr[r + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx: pairs.into_iter().map(|(_, c)| c).collect(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.iter_entries().all(|(r, c)| self.contains(c, r))
    }

    /// Boolean product: entry (i,j) present iff some t has a(i,t) and b(t,j).
    pub fn bool_matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(SgptError::ShapeMismatch {
                context: "bool_matmul",
                details: format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        // Stamp array marks columns already emitted for the current row.
        let mut stamp = vec![usize::MAX; other.cols];
        for i in 0..self.rows {
            let start = col_idx.len();
            for &t in self.row(i) {
                for &j in other.row(t) {
                    if stamp[j] != i {
                        stamp[j] = i;
                        col_idx.push(j);
                    }
                }
            }
            col_idx[start..].sort_unstable();
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            row_ptr,
            col_idx,
        })
    }

    /// Entrywise OR.
    pub fn bool_add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(SgptError::ShapeMismatch {
                context: "bool_add",
                details: format!(
                    "{}x{} plus {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for i in 0..self.rows {
            let (a, b) = (self.row(i), other.row(i));
            let (mut x, mut y) = (0, 0);
            while x < a.len() || y < b.len() {
                let next = match (a.get(x), b.get(y)) {
                    (Some(&u), Some(&v)) if u == v => {
                        x += 1;
                        y += 1;
                        u
                    }
                    (Some(&u), Some(&v)) if u < v => {
                        x += 1;
                        u
                    }
                    (Some(_), Some(&v)) => {
                        y += 1;
                        v
                    }
                    (Some(&u), None) => {
                        x += 1;
                        u
                    }
                    (None, Some(&v)) => {
                        y += 1;
                        v
                    }
                    (None, None) => unreachable!(),
                };
                col_idx.push(next);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
        })
    }

    /// Remove all (i,i) entries; off-diagonal untouched.
    pub fn zero_diagonal(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(SgptError::ShapeMismatch {
                context: "zero_diagonal",
                details: format!("{}x{} is not square", self.rows, self.cols),
            });
        }
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for i in 0..self.rows {
            col_idx.extend(self.row(i).iter().copied().filter(|&c| c != i));
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
        })
    }

    /// Dense 0/1 image, for oracles and inspection.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c) in self.iter_entries() {
            out.set(r, c, 1.0);
        }
        out
    }

    /// Text triplet dump `i j`, sorted row-major.
    pub fn write_triplets<W: Write>(&self, w: &mut W) -> Result<()> {
        for (r, c) in self.iter_entries() {
            writeln!(w, "{r} {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRealMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRealMatrix {
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            self.col_idx[lo..hi]
                .iter()
                .zip(&self.values[lo..hi])
                .map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    /// Symmetric GCN normalization: D̃^{-1/2}(A+I)D̃^{-1/2} with D̃ the degree
    /// of A+I. Rows of isolated nodes reduce to the self-loop entry 1.
    pub fn gcn_normalize(adj: &SparseBinaryMatrix) -> Result<Self> {
        if adj.rows() != adj.cols() {
            return Err(SgptError::ShapeMismatch {
                context: "gcn_normalize",
                details: format!("{}x{} is not square", adj.rows(), adj.cols()),
            });
        }
        if !adj.is_symmetric() {
            return Err(SgptError::InvalidInput(
                "gcn_normalize requires a symmetric adjacency".into(),
            ));
        }
        let n = adj.rows();
        let with_loops = adj.bool_add(&SparseBinaryMatrix::identity(n))?;
        let inv_sqrt_deg: Vec<f64> = (0..n)
            .map(|i| 1.0 / (with_loops.row(i).len() as f64).sqrt())
            .collect();
        let mut values = Vec::with_capacity(with_loops.nnz());
        for (r, c) in with_loops.iter_entries() {
            values.push(inv_sqrt_deg[r] * inv_sqrt_deg[c]);
        }
        Ok(Self {
            rows: n,
            cols: n,
            row_ptr: with_loops.row_ptr.clone(),
            col_idx: with_loops.col_idx.clone(),
            values,
        })
    }

    /// `self @ x`.
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != x.rows() {
            return Err(SgptError::ShapeMismatch {
                context: "spmm",
                details: format!(
                    "{}x{} times {}x{}",
                    self.rows,
                    self.cols,
                    x.rows(),
                    x.cols()
                ),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, x.cols());
        self.spmm_acc(x, &mut out);
        Ok(out)
    }

    pub(crate) fn spmm_acc(&self, x: &DenseMatrix, out: &mut DenseMatrix) {
        let width = x.cols();
        for r in 0..self.rows {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            let orow = &mut out.data_mut()[r * width..(r + 1) * width];
            for idx in lo..hi {
                let c = self.col_idx[idx];
                let v = self.values[idx];
                let xrow = &x.data()[c * width..(c + 1) * width];
                for (o, &xv) in orow.iter_mut().zip(xrow) {
                    *o += v * xv;
                }
            }
        }
    }

    /// `self^T @ x`, computed by scattering without materializing the transpose.
    pub fn spmm_transposed(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != x.rows() {
            return Err(SgptError::ShapeMismatch {
                context: "spmm_transposed",
                details: format!(
                    "{}x{} transposed times {}x{}",
                    self.rows,
                    self.cols,
                    x.rows(),
                    x.cols()
                ),
            });
        }
        let width = x.cols();
        let mut out = DenseMatrix::zeros(self.cols, width);
        for r in 0..self.rows {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            let xrow = x.row(r).to_vec();
            for idx in lo..hi {
                let c = self.col_idx[idx];
                let v = self.values[idx];
                let orow = &mut out.data_mut()[c * width..(c + 1) * width];
                for (o, &xv) in orow.iter_mut().zip(&xrow) {
                    *o += v * xv;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter_entries() {
            out.set(r, c, v);
        }
        out
    }

    /// Text triplet dump `i j v`, sorted row-major.
    pub fn write_triplets<W: Write>(&self, w: &mut W) -> Result<()> {
        for (r, c, v) in self.iter_entries() {
            writeln!(w, "{r} {c} {v:.17}")?;
        }
        Ok(())
    }
}
