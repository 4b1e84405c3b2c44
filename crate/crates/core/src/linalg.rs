//! Minimal dense linear algebra on packed triangular storage.
//!
//! A Cholesky factorization is the only matrix decomposition used in this
//! crate. Local designs are small (tens to a few hundred rows), so plain
//! cache-friendly loops over packed rows are both simple and fast, and the
//! factor can be extended one row at a time, which the greedy design
//! search depends on.

use ndarray::Array2;

use crate::error::{PalmError, Result};
use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower-triangular Cholesky factor in packed row-major storage
/// (row `i` holds `i + 1` entries).
#[derive(Clone, Debug)]
pub struct CholeskyFactor<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> CholeskyFactor<T> {
    /// Factors a symmetric positive-definite matrix, reading only its
    /// lower triangle.
    pub fn factor(a: &Array2<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(PalmError::DimensionMismatch {
                context: "cholesky factor",
                expected: n,
                found: a.ncols(),
            });
        }
        let mut f = Self::empty(n);
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            row.clear();
            row.extend((0..i).map(|j| a[[i, j]]));
            f.extend(&row, a[[i, i]])?;
        }
        Ok(f)
    }

    /// An empty factor that rows can be appended to.
    pub fn empty(capacity: usize) -> Self {
        Self {
            n: 0,
            l: Vec::with_capacity(capacity * (capacity + 1) / 2),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row `i` of the factor (`i + 1` entries, diagonal last).
    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let start = i * (i + 1) / 2;
        &self.l[start..start + i + 1]
    }

    /// Grows the factored matrix by one symmetric row: `col` holds its
    /// correlations with the existing rows and `diag` the diagonal entry.
    pub fn extend(&mut self, col: &[T], diag: T) -> Result<()> {
        debug_assert_eq!(col.len(), self.n);
        let n = self.n;
        let start = self.l.len();
        self.l.resize(start + n + 1, T::zero());
        let mut sumsq = T::zero();
        for i in 0..n {
            let (head, tail) = self.l.split_at_mut(start);
            let rs = i * (i + 1) / 2;
            let r = &head[rs..rs + i + 1];
            let u = (col[i] - dot(&r[..i], &tail[..i])) / r[i];
            tail[i] = u;
            sumsq = sumsq + u * u;
        }
        let pivot = diag - sumsq;
        if !(pivot > T::zero()) || !pivot.is_finite() {
            self.l.truncate(start);
            return Err(PalmError::Factorization {
                size: n + 1,
                pivot: n,
                hint: "",
            });
        }
        self.l[start + n] = pivot.sqrt();
        self.n = n + 1;
        Ok(())
    }

    /// Grows the factor by one row whose forward-solved prefix `row` (and its
    /// squared norm) the caller has already computed; equivalent to `extend`
    /// with the raw correlation column, skipping the solve.
    pub(crate) fn extend_presolved(&mut self, row: &[T], row_sumsq: T, diag: T) -> Result<()> {
        debug_assert_eq!(row.len(), self.n);
        let n = self.n;
        let pivot = diag - row_sumsq;
        if !(pivot > T::zero()) || !pivot.is_finite() {
            return Err(PalmError::Factorization {
                size: n + 1,
                pivot: n,
                hint: "",
            });
        }
        self.l.extend_from_slice(row);
        self.l.push(pivot.sqrt());
        self.n = n + 1;
        Ok(())
    }

    /// Solves `L x = b`.
    pub fn forward_solve(&self, b: &[T]) -> Vec<T> {
        debug_assert_eq!(b.len(), self.n);
        let mut x = vec![T::zero(); self.n];
        for i in 0..self.n {
            let r = self.row(i);
            x[i] = (b[i] - dot(&r[..i], &x[..i])) / r[i];
        }
        x
    }

    /// Solves `L^T x = b` in place.
    pub fn backward_solve_inplace(&self, x: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for j in i + 1..self.n {
                s = s - self.l[j * (j + 1) / 2 + i] * x[j];
            }
            x[i] = s / self.l[i * (i + 1) / 2 + i];
        }
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = self.forward_solve(b);
        self.backward_solve_inplace(&mut x);
        x
    }

    /// `x^T (L L^T)^{-1} x` via one forward solve.
    pub fn quad_form_inv(&self, x: &[T]) -> T {
        let u = self.forward_solve(x);
        dot(&u, &u)
    }

    /// Log determinant of the factored matrix.
    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.n).fold(T::zero(), |acc, i| {
            acc + two * self.l[i * (i + 1) / 2 + i].ln()
        })
    }

    /// Dense inverse of the factored matrix. O(n^3); used by likelihood
    /// gradients, not by prediction paths.
    pub fn inverse(&self) -> Array2<T> {
        let n = self.n;
        let mut inv = Array2::zeros((n, n));
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let x = self.solve(&e);
            for i in 0..n {
                inv[[i, j]] = x[i];
            }
        }
        inv
    }
}
