//! Dense row-major matrices and a Householder QR factorisation.
//!
//! Only what the estimator needs: least-squares solves, `(XᵀX)⁻¹` from the
//! triangular factor, and detection of linearly dependent columns.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major storage. Panics on a length mismatch.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Self {
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column {j} has wrong length");
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
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

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ v` without materialising the transpose.
    pub fn t_matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![T::zero(); self.cols];
        for (i, &w) in v.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x * w;
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self { rows: rows.len(), cols: self.cols, data }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// A column that is (numerically) a linear combination of earlier columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DependentColumn {
    pub column: usize,
    /// Earlier columns with non-negligible weight in the combination.
    pub depends_on: Vec<usize>,
}

/// Householder QR of a tall matrix with full column rank.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    rows: usize,
    cols: usize,
    /// Reflector k acts on rows `k..rows`; stored unnormalised with `tau = 2 / vᵀv`.
    reflectors: Vec<(Vec<T>, T)>,
    r: Matrix<T>,
}

impl<T: Scalar> Qr<T> {
    /// Factors `a`. Fails on the first column whose component orthogonal to
    /// the preceding columns is negligible relative to its own norm.
    pub fn factor(a: &Matrix<T>) -> Result<Self, DependentColumn> {
        let (n, k) = (a.rows, a.cols);
        assert!(n >= k, "QR requires rows >= cols");
        let mut work = a.clone();
        let norms: Vec<T> = (0..k)
            .map(|j| (0..n).map(|i| work[(i, j)] * work[(i, j)]).sum::<T>().sqrt())
            .collect();
        let tol = T::epsilon() * T::count(n.max(100)) * T::lit(10.0);
        let mut reflectors = Vec::with_capacity(k);

        for j in 0..k {
            let tail_norm = (j..n).map(|i| work[(i, j)] * work[(i, j)]).sum::<T>().sqrt();
            if norms[j] == T::zero() || tail_norm <= tol * norms[j] {
                let depends_on = dependency_weights(&work, j, &norms);
                return Err(DependentColumn { column: j, depends_on });
            }
            let x0 = work[(j, j)];
            let alpha = if x0 >= T::zero() { -tail_norm } else { tail_norm };
            let mut v: Vec<T> = (j..n).map(|i| work[(i, j)]).collect();
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let tau = T::lit(2.0) / vtv;
            for c in j..k {
                let s = (j..n).map(|i| v[i - j] * work[(i, c)]).sum::<T>() * tau;
                if s != T::zero() {
                    for i in j..n {
                        work[(i, c)] -= s * v[i - j];
                    }
                }
            }
            reflectors.push((v, tau));
        }

        let mut r = Matrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                r[(i, j)] = work[(i, j)];
            }
        }
        Ok(Self { rows: n, cols: k, reflectors, r })
    }

    pub fn r(&self) -> &Matrix<T> {
        &self.r
    }

    /// Applies `Qᵀ` to a vector of length `rows`.
    pub fn apply_qt(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows);
        let mut out = y.to_vec();
        apply_reflectors(&self.reflectors, &mut out);
        out
    }

    /// Least-squares solution of `A x ≈ y`.
    pub fn solve(&self, y: &[T]) -> Vec<T> {
        let qty = self.apply_qt(y);
        back_substitute(&self.r, &qty[..self.cols])
    }

    /// `R⁻¹`, upper triangular.
    pub fn r_inverse(&self) -> Matrix<T> {
        let k = self.cols;
        let mut inv = Matrix::zeros(k, k);
        for col in 0..k {
            let mut e = vec![T::zero(); k];
            e[col] = T::one();
            let x = back_substitute(&self.r, &e);
            for (i, v) in x.into_iter().enumerate() {
                inv[(i, col)] = v;
            }
        }
        inv
    }

    /// `(AᵀA)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn gram_inverse(&self) -> Matrix<T> {
        let ri = self.r_inverse();
        let k = self.cols;
        let mut out = Matrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                // R⁻¹ is upper triangular, so only columns >= max(i, j) contribute.
                let s: T = (j..k).map(|c| ri[(i, c)] * ri[(j, c)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

fn apply_reflectors<T: Scalar>(reflectors: &[(Vec<T>, T)], y: &mut [T]) {
    for (j, (v, tau)) in reflectors.iter().enumerate() {
        let s = dot(v, &y[j..]) * *tau;
        for (yi, vi) in y[j..].iter_mut().zip(v) {
            *yi -= s * *vi;
        }
    }
}

fn back_substitute<T: Scalar>(r: &Matrix<T>, b: &[T]) -> Vec<T> {
    let k = b.len();
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let s: T = ((i + 1)..k).map(|j| r[(i, j)] * x[j]).sum();
        x[i] = (b[i] - s) / r[(i, i)];
    }
    x
}

/// Regresses the dependent column on its predecessors to report which of
/// them make it redundant.
fn dependency_weights<T: Scalar>(
    work: &Matrix<T>,
    column: usize,
    norms: &[T],
) -> Vec<usize> {
    if column == 0 {
        return Vec::new();
    }
    let mut r = Matrix::zeros(column, column);
    for i in 0..column {
        for j in i..column {
            r[(i, j)] = work[(i, j)];
        }
    }
    let rhs: Vec<T> = (0..column).map(|i| work[(i, column)]).collect();
    let weights = back_substitute(&r, &rhs);
    let target = norms[column];
    let cutoff = T::lit(1e-6);
    weights
        .iter()
        .enumerate()
        .filter(|(j, w)| target > T::zero() && (w.abs() * norms[*j]) > cutoff * target)
        .map(|(j, _)| j)
        .collect()
}
