//! Small dense linear algebra: row-major matrices, partial-pivot LU and
//! Kronecker products. Generic over [`Scalar`] so the same solver serves
//! floating-point production paths and exact rational oracles.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(r, k)];
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] = out[(r, c)].clone() + a.clone() * other[(k, c)].clone();
                }
            }
        }
        out
    }

    /// Column vector product `A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
            .collect()
    }

    /// Row vector product `x A`.
    pub fn vec_mul(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.rows, x.len());
        let mut out = vec![T::zero(); self.cols];
        for (r, xr) in x.iter().enumerate() {
            if xr.is_zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o = o.clone() + xr.clone() * a.clone();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn scale(&self, s: &T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.clone() * s.clone()).collect() }
    }

    /// Entrywise max-abs difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| T::max_of(m, (a.clone() - b.clone()).magnitude()))
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|r| self.row(r).iter().fold(T::zero(), |acc, a| acc + a.magnitude()))
            .fold(T::zero(), T::max_of)
    }

    /// Solve `A x = b` by LU with partial pivoting.
    ///
    /// Fails when a pivot magnitude drops below `pivot_tol` (ignored for
    /// exact scalars, where only an exact zero is singular).
    pub fn solve(&self, b: &[T], pivot_tol: f64) -> Result<Vec<T>> {
        Lu::factor(self.clone(), pivot_tol)?.solve(b)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// LU factorisation `P A = L U` stored in place.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(mut a: DenseMatrix<T>, pivot_tol: f64) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Solve(format!("matrix is {}x{}, not square", a.rows, a.cols)));
        }
        let n = a.rows;
        let tol = T::lit(pivot_tol);
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut best = col;
            let mut best_mag = a[(col, col)].magnitude();
            for r in col + 1..n {
                let m = a[(r, col)].magnitude();
                if m > best_mag {
                    best = r;
                    best_mag = m;
                }
            }
            let singular = if T::EXACT { best_mag.is_zero() } else { best_mag < tol };
            if singular {
                return Err(Error::Solve(format!("pivot {:e} in column {col} is below tolerance", best_mag.approx())));
            }
            if best != col {
                for c in 0..n {
                    a.data.swap(col * n + c, best * n + c);
                }
                perm.swap(col, best);
            }
            let pivot = a[(col, col)].clone();
            for r in col + 1..n {
                if a[(r, col)].is_zero() {
                    continue;
                }
                let factor = a[(r, col)].clone() / pivot.clone();
                for c in col + 1..n {
                    let v = a[(r, c)].clone() - factor.clone() * a[(col, c)].clone();
                    a[(r, c)] = v;
                }
                a[(r, col)] = factor;
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.lu.rows;
        if b.len() != n {
            return Err(Error::Solve(format!("rhs has length {}, expected {n}", b.len())));
        }
        let mut x: Vec<T> = self.perm.iter().map(|&i| b[i].clone()).collect();
        for r in 0..n {
            let mut acc = x[r].clone();
            for c in 0..r {
                acc = acc - self.lu[(r, c)].clone() * x[c].clone();
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r].clone();
            for c in r + 1..n {
                acc = acc - self.lu[(r, c)].clone() * x[c].clone();
            }
            x[r] = acc / self.lu[(r, r)].clone();
        }
        Ok(x)
    }
}

/// Kronecker product `A (x) B`, index `(r1 * rows(B) + r2, c1 * cols(B) + c2)`.
pub fn kron<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    DenseMatrix::from_fn(a.rows * b.rows, a.cols * b.cols, |r, c| {
        a[(r / b.rows, c / b.cols)].clone() * b[(r % b.rows, c % b.cols)].clone()
    })
}

/// Kronecker sum `A (+) B = A (x) I + I (x) B` of square matrices.
pub fn kron_sum<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    kron(a, &DenseMatrix::identity(b.rows)).add(&kron(&DenseMatrix::identity(a.rows), b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;
    use proptest::prelude::*;

    #[test]
    fn solves_small_system_exactly() {
        let a = DenseMatrix::from_rows(vec![
            vec![ratio(3, 1), ratio(-1, 1), ratio(-1, 1)],
            vec![ratio(-1, 1), ratio(3, 1), ratio(-1, 1)],
            vec![ratio(-1, 1), ratio(-1, 1), ratio(3, 1)],
        ]);
        let b = vec![ratio(2, 3), ratio(-1, 6), ratio(-1, 6)];
        let x = a.solve(&b, 0.0).unwrap();
        assert_eq!(x, vec![ratio(1, 4), ratio(1, 24), ratio(1, 24)]);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(a.solve(&[1.0, 1.0], 1e-14), Err(Error::Solve(_))));
        let e: DenseMatrix<BigRational> =
            DenseMatrix::from_rows(vec![vec![ratio(1, 1), ratio(2, 1)], vec![ratio(2, 1), ratio(4, 1)]]);
        assert!(e.solve(&[ratio(1, 1), ratio(1, 1)], 0.0).is_err());
    }

    #[test]
    fn kronecker_sum_shape_and_entries() {
        let a = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = DenseMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let s = kron_sum(&a, &b);
        assert_eq!(s.rows(), 4);
        // ((0,0),(0,1)) = a00 * 0 + 1 * b01
        assert_eq!(s[(0, 1)], 1.0);
        assert_eq!(s[(0, 0)], 1.0);
        assert_eq!(s[(0, 2)], 2.0);
        assert_eq!(s[(3, 3)], 4.0);
    }

    proptest! {
        #[test]
        fn lu_residual_is_small(entries in proptest::collection::vec(-1.0f64..1.0, 25), rhs in proptest::collection::vec(-1.0f64..1.0, 5)) {
            // diagonally dominant so the system is well conditioned
            let a = DenseMatrix::from_fn(5, 5, |r, c| entries[r * 5 + c] + if r == c { 6.0 } else { 0.0 });
            let x = a.solve(&rhs, 1e-14).unwrap();
            let back = a.mul_vec(&x);
            for (u, v) in back.iter().zip(&rhs) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
