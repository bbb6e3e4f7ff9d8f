//! Row-major dense f64 matrices.
//!
//! This is the numeric carrier for features, embeddings, weights, and
//! gradients. Kernels are written so the inner loop runs over contiguous
//! slices and autovectorizes; the accumulate variants (`*_acc`) back the
//! reverse-mode gradient rules.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Result, SgptError};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SgptError::ShapeMismatch {
                context: "from_vec",
                details: format!("{} values for {}x{}", data.len(), rows, cols),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(SgptError::ShapeMismatch {
                context: "from_rows",
                details: "ragged rows".into(),
            });
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// Standard Gaussian entries scaled by `sigma`, deterministic under the RNG.
    pub fn gaussian<R: Rng>(rows: usize, cols: usize, sigma: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * sigma
            })
            .collect();
        Self { rows, cols, data }
    }

    /// Glorot-uniform init: entries from U(-b, b) with b = sqrt(6/(fan_in+fan_out)).
    pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
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
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self @ other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(SgptError::ShapeMismatch {
                context: "matmul",
                details: format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        matmul_acc(self, other, &mut out);
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(SgptError::ShapeMismatch {
                context: "add",
                details: format!(
                    "{}x{} plus {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(&other.data) {
            *o += v;
        }
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= factor;
        }
        out
    }

    /// `self += factor * other` (shapes must match).
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (o, v) in self.data.iter_mut().zip(&other.data) {
            *o += factor * v;
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out += a @ b` with an i-k-j loop so the innermost update is a contiguous axpy.
pub fn matmul_acc(a: &DenseMatrix, b: &DenseMatrix, out: &mut DenseMatrix) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!(out.rows, a.rows);
    debug_assert_eq!(out.cols, b.cols);
    let n = b.cols;
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = &mut out.data[i * n..(i + 1) * n];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * n..(k + 1) * n];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
}

/// `out += a @ b^T`: each output entry is a dot of two contiguous rows.
pub fn matmul_nt_acc(a: &DenseMatrix, b: &DenseMatrix, out: &mut DenseMatrix) {
    debug_assert_eq!(a.cols, b.cols);
    debug_assert_eq!(out.rows, a.rows);
    debug_assert_eq!(out.cols, b.rows);
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = b.row(j);
            let mut acc = 0.0;
            for (x, y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            *o += acc;
        }
    }
}

/// `out += a^T @ b`: per input row an axpy into the matching output row.
pub fn matmul_tn_acc(a: &DenseMatrix, b: &DenseMatrix, out: &mut DenseMatrix) {
    debug_assert_eq!(a.rows, b.rows);
    debug_assert_eq!(out.rows, a.cols);
    debug_assert_eq!(out.cols, b.cols);
    let n = b.cols;
    for i in 0..a.rows {
        let arow = a.row(i);
        let brow = b.row(i);
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let orow = &mut out.data[k * n..(k + 1) * n];
            for (o, &bij) in orow.iter_mut().zip(brow) {
                *o += aik * bij;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn matmul_matches_naive() {
        let mut rng = rng_from(1);
        let a = DenseMatrix::gaussian(7, 5, 1.0, &mut rng);
        let b = DenseMatrix::gaussian(5, 9, 1.0, &mut rng);
        let got = a.matmul(&b).unwrap();
        let want = naive_matmul(&a, &b);
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn matmul_shape_mismatch_errors() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(4, 2);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn nt_and_tn_match_explicit_transpose() {
        let mut rng = rng_from(2);
        let a = DenseMatrix::gaussian(6, 4, 1.0, &mut rng);
        let b = DenseMatrix::gaussian(5, 4, 1.0, &mut rng);
        let mut got = DenseMatrix::zeros(6, 5);
        matmul_nt_acc(&a, &b, &mut got);
        let want = naive_matmul(&a, &b.transpose());
        assert!(got.max_abs_diff(&want) < 1e-12);

        let c = DenseMatrix::gaussian(6, 3, 1.0, &mut rng);
        let mut got2 = DenseMatrix::zeros(4, 3);
        matmul_tn_acc(&a, &c, &mut got2);
        let want2 = naive_matmul(&a.transpose(), &c);
        assert!(got2.max_abs_diff(&want2) < 1e-12);
    }

    #[test]
    fn glorot_entries_respect_bound() {
        let mut rng = rng_from(3);
        let m = DenseMatrix::glorot_uniform(20, 30, &mut rng);
        let bound = (6.0 / 50.0f64).sqrt();
        assert!(m.data().iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn gaussian_is_seed_deterministic() {
        let a = DenseMatrix::gaussian(4, 4, 1.0, &mut rng_from(9));
        let b = DenseMatrix::gaussian(4, 4, 1.0, &mut rng_from(9));
        assert_eq!(a, b);
    }
}
