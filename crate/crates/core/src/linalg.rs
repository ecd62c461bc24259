//! Small linear-algebra kit: a CSR matrix for assembled stiffness operators,
//! a row-major dense matrix, and a banded Cholesky factorization that serves
//! both (a dense matrix is just a band matrix with full bandwidth).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row form. Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored entries of one row as (column, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Largest |a_ij - a_ji| over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Largest |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    /// Replaces row and column `k` by the identity row/column.
    pub fn ground(&mut self, k: usize) {
        for r in 0..self.dim {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[idx];
                if r == k || c == k {
                    self.vals[idx] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Dense row-major matrix.
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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// y = Aᵀ x
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr != 0.0 {
                axpy(xr, self.row(r), &mut y);
            }
        }
        y
    }

    /// A Aᵀ (rows × rows).
    pub fn gram_rows(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Aᵀ A (cols × cols).
    pub fn gram_cols(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                if row[i] == 0.0 {
                    continue;
                }
                let gi = g.row_mut(i);
                axpy(row[i], row, gi);
            }
        }
        g
    }

    /// Squared Euclidean norm of every column, i.e. diag(AᵀA).
    pub fn column_norms_sq(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, &v) in out.iter_mut().zip(self.row(r)) {
                *o += v * v;
            }
        }
        out
    }
}

impl core::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Cholesky factor L (A = L Lᵀ) of a symmetric positive-definite band matrix.
///
/// Row `i` of L stores columns `i - bw ..= i`; entries left of column 0 are
/// padding.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    dim: usize,
    bw: usize,
    lower: Vec<f64>,
}

impl BandCholesky {
    pub fn factor_sparse(a: &SparseMatrix) -> Result<Self> {
        let bw = a.bandwidth();
        let mut chol = Self::empty(a.dim(), bw);
        for r in 0..a.dim() {
            for (c, v) in a.row(r) {
                if c <= r {
                    *chol.at_mut(r, c) = v;
                }
            }
        }
        chol.factorize()?;
        Ok(chol)
    }

    pub fn factor_dense(a: &DenseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                actual: a.cols(),
            });
        }
        let n = a.rows();
        let mut chol = Self::empty(n, n.saturating_sub(1));
        for r in 0..n {
            for c in 0..=r {
                *chol.at_mut(r, c) = a[(r, c)];
            }
        }
        chol.factorize()?;
        Ok(chol)
    }

    fn empty(dim: usize, bw: usize) -> Self {
        Self {
            dim,
            bw,
            lower: vec![0.0; dim * (bw + 1)],
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.lower[r * (self.bw + 1) + (c + self.bw - r)]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.lower[r * (self.bw + 1) + (c + self.bw - r)]
    }

    fn factorize(&mut self) -> Result<()> {
        let w = self.bw + 1;
        // Scale for the pivot test.
        let scale = (0..self.dim)
            .map(|i| self.at(i, i).abs())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..self.dim {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let start = lo.max(j.saturating_sub(self.bw));
                // Σ_k L[i,k] L[j,k] over the shared band.
                let ri = i * w + self.bw - i;
                let rj = j * w + self.bw - j;
                let mut s = self.lower[ri + j];
                for k in start..j {
                    s -= self.lower[ri + k] * self.lower[rj + k];
                }
                if i == j {
                    if !(s > scale * 1e-14) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    self.lower[ri + i] = libm::sqrt(s);
                } else {
                    self.lower[ri + j] = s / self.lower[rj + j];
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        let n = self.dim;
        for i in 0..n {
            let lo = i.saturating_sub(self.bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let hi = (i + self.bw).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// y += alpha x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_are_merged() {
        let m = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn band_cholesky_solves_tridiagonal() {
        let a = laplacian_1d(6);
        let x_true: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let b = a.mul_vec(&x_true);
        let x = BandCholesky::factor_sparse(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_and_band_factorizations_agree() {
        let a = laplacian_1d(5);
        let mut d = DenseMatrix::zeros(5, 5);
        for r in 0..5 {
            for c in 0..5 {
                d[(r, c)] = a.get(r, c);
            }
        }
        let b = [1.0, -2.0, 0.5, 3.0, 0.0];
        let x1 = BandCholesky::factor_sparse(&a).unwrap().solve(&b);
        let x2 = BandCholesky::factor_dense(&d).unwrap().solve(&b);
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        // Graph Laplacian without grounding has constant null space.
        let t = [(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)];
        let a = SparseMatrix::from_triplets(2, &t);
        assert!(matches!(
            BandCholesky::factor_sparse(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn grams_match_products() {
        let a = DenseMatrix::from_row_major(2, 3, vec![1.0, 2.0, 0.0, -1.0, 0.5, 3.0]).unwrap();
        let g = a.gram_rows();
        assert_eq!(g[(0, 1)], -1.0 + 2.0 * 0.5);
        let h = a.gram_cols();
        assert_eq!(h[(2, 1)], 0.0 * 2.0 + 3.0 * 0.5);
        assert_eq!(a.column_norms_sq(), vec![2.0, 4.25, 9.0]);
        assert_eq!(a.tr_mul_vec(&[1.0, 1.0]), vec![0.0, 2.5, 3.0]);
    }
}
