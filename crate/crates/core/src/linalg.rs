//! Small dense linear-algebra kernel: row-major matrices, Cholesky with
//! jitter escalation and incremental extension, triangular solves and a
//! Jacobi eigensolver for the (tiny) posterior covariance blocks.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
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
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::invalid("matmul dimension mismatch"));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Appends a row (and column) to a square matrix, filling the new
    /// off-diagonal column with zeros.
    fn grown(&self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n + 1, n + 1);
        for i in 0..n {
            out.row_mut(i)[..n].copy_from_slice(self.row(i));
        }
        out
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product with four independent accumulators so the loop vectorises.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

/// In-place lower Cholesky factorisation. On failure returns the index of
/// the first non-positive pivot; the matrix contents are then unspecified.
pub fn cholesky_in_place<T: Scalar>(a: &mut Matrix<T>) -> std::result::Result<(), usize> {
    let n = a.rows;
    debug_assert_eq!(n, a.cols);
    for i in 0..n {
        let (top, bottom) = a.data.split_at_mut(i * n);
        let row_i = &mut bottom[..n];
        for j in 0..i {
            let row_j = &top[j * n..j * n + n];
            let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
            row_i[j] = s / row_j[j];
        }
        let d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if !(d > T::zero()) || !d.is_finite() {
            return Err(i);
        }
        row_i[i] = d.sqrt();
        for v in row_i[i + 1..].iter_mut() {
            *v = T::zero();
        }
    }
    Ok(())
}

/// Relative jitter levels tried, in order, when a plain factorisation fails.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Cholesky factor of a symmetric matrix, escalating a diagonal jitter
/// (relative to the mean diagonal) until the factorisation succeeds.
/// Returns the factor and the absolute jitter that was added.
pub fn cholesky_jittered<T: Scalar>(a: &Matrix<T>) -> Result<(Matrix<T>, T)> {
    let n = a.rows;
    let mean_diag = if n == 0 {
        T::one()
    } else {
        (0..n).map(|i| a[(i, i)]).sum::<T>() / T::lit(n as f64)
    };
    let mut last = T::zero();
    for &rel in JITTER_LADDER.iter() {
        let jitter = mean_diag.abs() * T::lit(rel);
        let mut m = a.clone();
        if jitter > T::zero() {
            for i in 0..n {
                m[(i, i)] += jitter;
            }
        }
        if cholesky_in_place(&mut m).is_ok() {
            return Ok((m, jitter));
        }
        last = jitter;
    }
    Err(Error::IllConditioned {
        jitter: last.as_f64(),
    })
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows;
    let mut x = vec![T::zero(); n];
    for i in 0..n {
        let row = l.row(i);
        x[i] = (b[i] - dot(&row[..i], &x[..i])) / row[i];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows;
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let row = l.row(i);
        x[i] /= row[i];
        let xi = x[i];
        for (xk, &lik) in x[..i].iter_mut().zip(&row[..i]) {
            *xk -= lik * xi;
        }
    }
    x
}

/// Solves `(L Lᵀ) x = b`.
pub fn cholesky_solve<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// Extends the Cholesky factor of `A` to that of `[[A, k], [kᵀ, c]]` in
/// `O(n²)`. Fails if the Schur complement is not positive.
pub fn cholesky_extend<T: Scalar>(l: &Matrix<T>, k: &[T], c: T) -> Result<Matrix<T>> {
    let n = l.rows;
    let new_row = solve_lower(l, k);
    let schur = c - dot(&new_row, &new_row);
    if !(schur > T::zero()) || !schur.is_finite() {
        return Err(Error::IllConditioned { jitter: 0.0 });
    }
    let mut out = l.grown();
    out.row_mut(n)[..n].copy_from_slice(&new_row);
    out[(n, n)] = schur.sqrt();
    Ok(out)
}

/// Solves a small dense symmetric positive-definite system (used for the
/// GLS normal equations, at most a handful of unknowns).
pub fn solve_spd_small<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let (l, _) = cholesky_jittered(a)?;
    Ok(cholesky_solve(&l, b))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are eigenvectors.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut norm = T::zero();
        for i in 0..n {
            for j in 0..n {
                let x = m[(i, j)] * m[(i, j)];
                norm += x;
                if i != j {
                    off += x;
                }
            }
        }
        if off <= eps * eps * norm || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spd(n: usize) -> Matrix<f64> {
        let mut b = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4;
            }
        }
        let mut a = b.matmul(&b.transpose()).unwrap();
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd(9);
        let (l, jitter) = cholesky_jittered(&a).unwrap();
        assert_eq!(jitter, 0.0);
        let back = l.matmul(&l.transpose()).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_abs_diff_eq!(back[(i, j)], a[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn solves_match_matvec() {
        let a = spd(7);
        let (l, _) = cholesky_jittered(&a).unwrap();
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        let x = cholesky_solve(&l, &b);
        let ax = a.mat_vec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn extension_equals_full_factor() {
        let a = spd(8);
        let mut head = Matrix::zeros(7, 7);
        for i in 0..7 {
            for j in 0..7 {
                head[(i, j)] = a[(i, j)];
            }
        }
        let (l7, _) = cholesky_jittered(&head).unwrap();
        let k: Vec<f64> = (0..7).map(|i| a[(7, i)]).collect();
        let l8 = cholesky_extend(&l7, &k, a[(7, 7)]).unwrap();
        let (full, _) = cholesky_jittered(&a).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_abs_diff_eq!(l8[(i, j)], full[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_matrix_reports_ill_conditioning() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match cholesky_jittered(&a) {
            Err(Error::IllConditioned { jitter }) => assert!(jitter > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jacobi_eigen_diagonalises() {
        let a = spd(5);
        let (vals, vecs) = symmetric_eigen(&a);
        for k in 0..5 {
            let col: Vec<f64> = (0..5).map(|i| vecs[(i, k)]).collect();
            let av = a.mat_vec(&col);
            for i in 0..5 {
                assert_abs_diff_eq!(av[i], vals[k] * col[i], epsilon = 1e-10);
            }
        }
    }
}
