//! Minimal dense vector/matrix kernel: row-major storage, LU with partial
//! pivoting, matrix-vector products and the norms the solver needs.
//!
//! Newton systems here are symmetric but indefinite (saddle-point structure
//! with a zero trailing block), so partial pivoting is the right tool and no
//! Cholesky path is provided. Iterative solvers are out of scope: reduced
//! systems stay small enough for direct factorization.

use thiserror::Error;

/// Relative pivot threshold: a pivot below `PIVOT_REL_TOL * max|M_ij|`
/// is treated as a breakdown and reported as [`LinalgError::SingularMatrix`].
pub const PIVOT_REL_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum LinalgError {
    /// Pivot magnitude fell below `1e-14 * max|M_ij|` during elimination.
    #[error("singular matrix: pivot {pivot:.3e} below threshold {threshold:.3e} at step {step}")]
    SingularMatrix {
        step: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Dense column vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    /// True when every entry is finite (no NaN, no infinities).
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean norm.
    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Max-magnitude norm; 0 for the empty vector.
    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&self, alpha: f64) -> DenseVector {
        DenseVector::from_vec(self.data.iter().map(|v| alpha * v).collect())
    }

    pub fn add(&self, other: &DenseVector) -> DenseVector {
        assert_eq!(self.len(), other.len(), "add length mismatch");
        DenseVector::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &DenseVector) -> DenseVector {
        assert_eq!(self.len(), other.len(), "sub length mismatch");
        DenseVector::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Gathers the entries at `indices` into a shorter vector.
    pub fn gather(&self, indices: &[usize]) -> DenseVector {
        DenseVector::from_vec(indices.iter().map(|&i| self.data[i]).collect())
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
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
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from row-major flat storage. Panics if the length disagrees
    /// with `rows * cols`; that is a programming error, not problem data.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "flat storage length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Max absolute entry; the scale used by the pivot breakdown guard.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matvec(&self, x: &DenseVector) -> DenseVector {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut out = DenseVector::zeros(self.rows);
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.as_slice()) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    /// Computes `Mᵀ x` without materializing the transpose.
    pub fn matvec_transpose(&self, x: &DenseVector) -> DenseVector {
        assert_eq!(x.len(), self.rows, "matvec_transpose dimension mismatch");
        let mut out = DenseVector::zeros(self.cols);
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (j, a) in row.iter().enumerate() {
                out[j] += a * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Gram matrix `MᵀM`, exploiting symmetry of the result.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for r in 0..self.rows {
                    acc += self.get(r, i) * self.get(r, j);
                }
                out.set(i, j, acc);
                out.set(j, i, acc);
            }
        }
        out
    }

    /// Copies the listed columns, preserving order.
    pub fn select_columns(&self, indices: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, indices.len());
        for i in 0..self.rows {
            for (jj, &j) in indices.iter().enumerate() {
                out.set(i, jj, self.get(i, j));
            }
        }
        out
    }

    /// Copies the listed rows, preserving order.
    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(indices.len(), self.cols);
        for (ii, &i) in indices.iter().enumerate() {
            out.as_row_mut(ii).copy_from_slice(self.row(i));
        }
        out
    }

    fn as_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Solves `M x = rhs` by LU factorization with partial (row) pivoting.
    ///
    /// Breakdown is declared when a pivot falls to or below
    /// `1e-14 * max|M_ij|`; the all-zero matrix is singular at step 0.
    pub fn lu_solve(&self, rhs: &DenseVector) -> Result<DenseVector, LinalgError> {
        let n = self.rows;
        if self.cols != n {
            return Err(LinalgError::DimensionMismatch {
                context: "lu_solve requires a square matrix",
                expected: n,
                got: self.cols,
            });
        }
        if rhs.len() != n {
            return Err(LinalgError::DimensionMismatch {
                context: "lu_solve rhs length",
                expected: n,
                got: rhs.len(),
            });
        }
        let threshold = PIVOT_REL_TOL * self.norm_max();
        let mut a = self.data.clone();
        let mut x = rhs.as_slice().to_vec();

        for k in 0..n {
            // partial pivoting: largest magnitude in column k, rows k..n
            let mut piv_row = k;
            let mut piv_val = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val <= threshold {
                return Err(LinalgError::SingularMatrix {
                    step: k,
                    pivot: piv_val,
                    threshold,
                });
            }
            if piv_row != k {
                for j in 0..n {
                    a.swap(k * n + j, piv_row * n + j);
                }
                x.swap(k, piv_row);
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    a[i * n + j] -= factor * a[k * n + j];
                }
                x[i] -= factor * x[k];
            }
        }
        // back substitution
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in (k + 1)..n {
                acc -= a[k * n + j] * x[j];
            }
            x[k] = acc / a[k * n + k];
        }
        Ok(DenseVector::from_vec(x))
    }

    /// Numerical rank estimate: Gaussian elimination with partial pivoting
    /// on a copy, counting pivots above `rel_tol * max|M_ij|`.
    pub fn rank_estimate(&self, rel_tol: f64) -> usize {
        let (m, n) = (self.rows, self.cols);
        let threshold = rel_tol * self.norm_max();
        let mut a = self.data.clone();
        let mut rank = 0;
        let mut row = 0;
        for col in 0..n {
            if row == m {
                break;
            }
            let mut piv_row = row;
            let mut piv_val = a[row * n + col].abs();
            for i in (row + 1)..m {
                let v = a[i * n + col].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val <= threshold {
                continue;
            }
            if piv_row != row {
                for j in 0..n {
                    a.swap(row * n + j, piv_row * n + j);
                }
            }
            let pivot = a[row * n + col];
            for i in (row + 1)..m {
                let factor = a[i * n + col] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[i * n + j] -= factor * a[row * n + j];
                }
            }
            rank += 1;
            row += 1;
        }
        rank
    }

    /// Positive definiteness of a symmetric matrix via unpivoted elimination:
    /// all leading pivots strictly above `rel_tol * max|M_ij|`.
    pub fn sym_positive_definite(&self, rel_tol: f64) -> bool {
        let n = self.rows;
        if self.cols != n {
            return false;
        }
        if n == 0 {
            return true;
        }
        let threshold = rel_tol * self.norm_max();
        let mut a = self.data.clone();
        for k in 0..n {
            let pivot = a[k * n + k];
            if !(pivot > threshold) {
                return false;
            }
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    a[i * n + j] -= factor * a[k * n + j];
                }
            }
        }
        true
    }
}
