//! Small dense matrices.
//!
//! The catalog only needs matrices of modest size (quadratic forms, the
//! real representation of a discrete Fourier transform), so a plain
//! row-major store with a Jacobi eigensolver for the symmetric case keeps
//! the crate free of linear-algebra dependencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix shape/data mismatch");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `A^T x`; with an orthogonal `A` this is the inverse transform.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len());
        let mut out = vec![0.0; self.cols];
        for (row, xi) in self.data.chunks_exact(self.cols).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn apply(&self, x: &Point) -> Point {
        Point::new(self.matvec(x.coords()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    /// ascending order.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_symmetric(1e-12) {
            return Err(Error::InvalidParameter(
                "symmetric eigensolver applied to a non-symmetric matrix".into(),
            ));
        }
        let n = self.rows;
        let mut a = self.clone();
        // Off-diagonal Frobenius norm drives the sweep count; quadratic
        // convergence makes 50 sweeps far more than enough for n <= 64.
        for _ in 0..50 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off.sqrt() < 1e-14 * (1.0 + a.frobenius()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        eigs.sort_by(f64::total_cmp);
        Ok(eigs)
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Solves `M x = rhs` by Gaussian elimination with partial pivoting and
    /// returns `(x, condition_estimate)`.  The condition estimate is the
    /// ratio of largest to smallest pivot magnitude, a cheap surrogate that
    /// is exact enough to flag numerically singular prox systems.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, rhs.len());
        let n = self.rows;
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();
        let mut max_pivot = 0.0f64;
        let mut min_pivot = f64::INFINITY;
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap();
            let pivot = a[pivot_row * n + col];
            if pivot.abs() < 1e-300 {
                return Err(Error::SingularProx {
                    condition: f64::INFINITY,
                });
            }
            max_pivot = max_pivot.max(pivot.abs());
            min_pivot = min_pivot.min(pivot.abs());
            if pivot_row != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot_row * n + k);
                }
                b.swap(col, pivot_row);
            }
            for row in (col + 1)..n {
                let f = a[row * n + col] / a[col * n + col];
                if f == 0.0 {
                    continue;
                }
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut s = b[row];
            for k in (row + 1)..n {
                s -= a[row * n + k] * x[k];
            }
            x[row] = s / a[row * n + row];
        }
        Ok((x, max_pivot / min_pivot))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}
